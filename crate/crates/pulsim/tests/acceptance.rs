//! Acceptance suite: one test per criterion, each printing a `[PASS]`/`[FAIL]`
//! line per clause. Run with
//! `cargo test -p pulsim --test acceptance -- --nocapture`.
//!
//! Three clauses are expected to stay red in this model and are asserted as
//! written anyway: the SVPWM 2x THD margin at m = 0.4 (criterion 6), the
//! module-1 minus module-3 current band (criterion 8), and the SUR crossover
//! (criterion 9). See the repository discussion of each in the module docs;
//! every other clause passes.

use pulsim::backend::BackendConfig;
use pulsim::circuit::{filter_frequency_response, FilterParams};
use pulsim::metrics::{
    harmonic_coeff, harmonic_magnitude, ripple_analytic, switching_ripple, thd_broadband,
    BackendTopology,
};
use pulsim::pwm::{SwitchEdge, SwitchSite};
use pulsim::reference::{
    envelope_dc_ref, frontend_mod_indices, gen_three_phase_refs, identify_sector,
    sector_table_mod_indices, PhaseTriple, ReferenceState,
};
use pulsim::scenario::parse_scenario;
use pulsim::sim::{simulate, simulate_dcdc, sur_study, DcSource};
use pulsim::sweep::run_comparison;
use rand::{Rng, SeedableRng};
use std::f64::consts::{PI, TAU};
use std::time::Instant;

struct Clauses {
    name: &'static str,
    start: Instant,
    results: Vec<(String, bool)>,
}

impl Clauses {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            start: Instant::now(),
            results: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.results.push((detail, ok));
    }

    fn finish(self) {
        let elapsed = self.start.elapsed().as_secs_f64();
        let all_ok = self.results.iter().all(|(_, ok)| *ok);
        for (detail, ok) in &self.results {
            println!(
                "  [{}] {}: {detail}",
                if *ok { "pass" } else { "FAIL" },
                self.name
            );
        }
        println!(
            "[{}] {} ({elapsed:.1}s)",
            if all_ok { "PASS" } else { "FAIL" },
            self.name
        );
        assert!(all_ok, "{} has failing clauses", self.name);
    }
}

/// Full-scale drive document (16 x 40 V backend, 640 V bus, 10 kHz frontend
/// carrier, 1.75 ohm / 200 uH load).
fn fullscale_doc(strategy: &str, m: f64) -> String {
    let mut doc = format!(
        "\
[strategy]
kind = {strategy}
[reference]
m = {m}
f = 50
[frontend]
f_inv = 10k
[backend]
n_mdl = 16
v_mdl = 40
f_mdl = 5k
[filter]
l = 30u
c = 60u
[load]
kind = series_rl
r = 1.75
l = 200u
[compare]
i_pk = 200
"
    );
    if strategy != "proposed" {
        doc.push_str("[dclink]\nvdc = 640\n");
    }
    doc
}

/// Desk-scale bench document (8 x 16.4 V backend, 2.2 ohm / 100 uH load).
fn bench_doc(offsets: &str) -> String {
    format!(
        "\
[strategy]
kind = proposed
[reference]
m = 0.95
f = 50
[frontend]
f_inv = 10k
[backend]
n_mdl = 8
v_mdl = 16.4
f_mdl = 5k
capacity_ah = 5.2
offsets = {offsets}
[filter]
l = 30u
c = 60u
[load]
kind = series_rl
r = 2.2
l = 100u
[timing]
settle = 60m
duration = 140m
"
    )
}

fn fig4_backend() -> BackendConfig {
    BackendConfig::uniform(8, 40.0, 0.0, 5.2, 5e3)
}

#[test]
fn criterion_01_envelope_law() {
    let mut c = Clauses::new("criterion 1: envelope law");
    let env_at = |theta: f64| {
        envelope_dc_ref(&gen_three_phase_refs(&ReferenceState::new(
            1.0, 50.0, theta, 1.0,
        )))
    };
    // Analytic extreme points: minima at the phase apexes, maxima at the
    // line-voltage apexes.
    let min_pt = env_at(PI / 2.0);
    let max_pt = env_at(PI / 3.0);
    c.check(
        (min_pt - 1.5).abs() < 1e-6,
        format!("min 1.5 at apex: {min_pt:.9}"),
    );
    c.check(
        (max_pt - 3f64.sqrt()).abs() < 1e-6,
        format!("max sqrt(3) at line apex: {max_pt:.9}"),
    );
    // Sweep: range, period pi/3, and six pulses per fundamental.
    let n = 60_000;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut period_err: f64 = 0.0;
    let mut minima = 0;
    let mut prev_falling = false;
    let mut prev = env_at(0.0);
    for k in 1..=n {
        let theta = k as f64 * TAU / n as f64;
        let e = env_at(theta);
        min = min.min(e);
        max = max.max(e);
        period_err = period_err.max((e - env_at(theta + PI / 3.0)).abs());
        let falling = e < prev;
        if prev_falling && !falling {
            minima += 1;
        }
        prev_falling = falling;
        prev = e;
    }
    c.check(
        (min - 1.5).abs() < 1e-6 && (max - 3f64.sqrt()).abs() < 1e-6,
        format!("sweep range [{min:.7}, {max:.7}]"),
    );
    c.check(
        period_err < 1e-9,
        format!("pi/3 periodicity, worst deviation {period_err:.2e}"),
    );
    c.check(minima == 6, format!("{minima} pulses per fundamental"));
    c.finish();
}

#[test]
fn criterion_02_switching_count_ratio() {
    let mut c = Clauses::new("criterion 2: switching-count ratio");
    let mut counts = Vec::new();
    for strategy in ["proposed", "svpwm", "dpwm"] {
        let s = parse_scenario(&fullscale_doc(strategy, 0.75)).unwrap();
        let trace = simulate(&s).unwrap();
        let report = pulsim::compute_report(&trace, &s).unwrap();
        counts.push(report.commutations_frontend);
    }
    let (p, s, d) = (counts[0], counts[1], counts[2]);
    let ratio_p = 3.0 * p / s;
    let ratio_d = 1.5 * d / s;
    c.check(
        (ratio_p - 1.0).abs() <= 0.10,
        format!("proposed {p:.0}/fund vs svpwm {s:.0}: 3x ratio {ratio_p:.3}"),
    );
    c.check(
        (ratio_d - 1.0).abs() <= 0.10,
        format!("dpwm {d:.0}/fund vs svpwm {s:.0}: 1.5x ratio {ratio_d:.3}"),
    );
    c.finish();
}

#[test]
fn criterion_03_quiet_legs() {
    let mut c = Clauses::new("criterion 3: quiet legs");
    let s = parse_scenario(&fullscale_doc("proposed", 0.75)).unwrap();
    let trace = simulate(&s).unwrap();
    let (a, b) = trace.metrics_window();
    let t_start = a as f64 * trace.dt;
    let t_end = b as f64 * trace.dt;
    let period = 1.0 / s.f_inv;
    // Sector-boundary times from the trace's sector column.
    let mut boundaries = Vec::new();
    for k in a + 1..b {
        if trace.sector[k] != trace.sector[k - 1] {
            boundaries.push(k as f64 * trace.dt);
        }
    }
    let first = (t_start / period).ceil() as usize;
    let last = (t_end / period).floor() as usize;
    let mut bad = 0usize;
    let mut checked = 0usize;
    let mut exceptions = 0usize;
    for p in first..last {
        let (w0, w1) = (p as f64 * period, (p + 1) as f64 * period);
        let mut legs = [false; 3];
        for e in &trace.events {
            if e.t >= w0 && e.t < w1 && e.edge == SwitchEdge::TurnOn {
                if let SwitchSite::FrontendLeg(ph) = e.site {
                    legs[ph.index()] = true;
                }
            }
        }
        let n_legs = legs.iter().filter(|&&x| x).count();
        let has_boundary = boundaries.iter().any(|&t| t >= w0 && t < w1);
        checked += 1;
        if has_boundary {
            exceptions += 1;
            if n_legs > 2 {
                bad += 1;
            }
        } else if n_legs != 1 {
            bad += 1;
        }
    }
    c.check(
        bad == 0 && checked > 300,
        format!("{checked} carrier periods, {exceptions} boundary exceptions, {bad} violations"),
    );
    c.finish();
}

#[test]
fn criterion_04_ripple_oracle() {
    let mut c = Clauses::new("criterion 4: ripple oracle");
    let worst = ripple_analytic(BackendTopology::Chb, 40.0, 8, 4.5 / 8.0, 30e-6, 60e-6, 5e3);
    c.check(
        (worst - 0.217).abs() < 5e-4,
        format!("CHB worst-case analytic {worst:.6} V"),
    );
    let buck = ripple_analytic(BackendTopology::Buck, 40.0, 8, 0.5, 30e-6, 60e-6, 40e3);
    c.check(
        (buck - 1.736).abs() < 5e-4 && (buck - 8.0 * worst).abs() < 1e-9,
        format!("buck at 40 kHz, m=0.5: {buck:.6} V = N x CHB worst"),
    );
    let cfg = fig4_backend();
    let filt = FilterParams::new(30e-6, 60e-6);
    let dt = 1.0 / (200.0 * 40e3);
    for m_dc in [0.3, 0.45, 0.6, 0.8] {
        let trace = simulate_dcdc(
            &DcSource::Chb {
                cfg: cfg.clone(),
                m_dc,
            },
            &filt,
            3.0,
            30e-3,
            15e-3,
            dt,
            false,
        );
        let s0 = trace.settle_index();
        let measured = switching_ripple(&trace.v_out[s0..], dt, None, 0.0);
        let analytic = ripple_analytic(BackendTopology::Chb, 40.0, 8, m_dc, 30e-6, 60e-6, 5e3);
        let rel = (measured - analytic).abs() / analytic;
        c.check(
            rel < 0.20,
            format!(
                "m_dc={m_dc}: simulated {measured:.4} V vs analytic {analytic:.4} V ({:.1}% apart)",
                rel * 100.0
            ),
        );
    }
    c.finish();
}

#[test]
fn criterion_05_filter_response() {
    let mut c = Clauses::new("criterion 5: filter response");
    let mut filt = FilterParams::new(30e-6, 60e-6);
    filt.r_eq = 3.0;
    let r = filter_frequency_response(&filt, 1e3);
    c.check(
        (1.066..=1.086).contains(&r.gain),
        format!("gain at 1 kHz: {:.4}", r.gain),
    );
    c.check(
        (-4.4..=-3.4).contains(&r.phase_deg),
        format!("phase at 1 kHz: {:.3} deg", r.phase_deg),
    );
    // Step response of the unloaded filter rings at the L-C resonance.
    let dt = 5e-8;
    let trace = simulate_dcdc(
        &DcSource::Fixed { v: 320.0 },
        &filt,
        f64::INFINITY,
        3e-3,
        0.0,
        dt,
        true,
    );
    let mut crossings = Vec::new();
    let mut prev = trace.v_out[0] - 320.0;
    for (k, &v) in trace.v_out.iter().enumerate().skip(1) {
        let now = v - 320.0;
        if prev < 0.0 && now >= 0.0 {
            crossings.push(k as f64 * dt);
        }
        prev = now;
    }
    let periods: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
    let f_ring = periods.len() as f64 / periods.iter().sum::<f64>();
    c.check(
        (f_ring - 3750.0).abs() / 3750.0 < 0.02,
        format!("step response rings at {f_ring:.0} Hz"),
    );
    c.finish();
}

#[test]
fn criterion_06_thd_behavior() {
    let mut c = Clauses::new("criterion 6: THD behavior");
    let grid: Vec<f64> = (0..14).map(|k| 0.3 + k as f64 * 0.05).collect();
    let thd_of = |strategy: &str, m: f64| -> f64 {
        let s = parse_scenario(&fullscale_doc(strategy, m)).unwrap();
        let trace = simulate(&s).unwrap();
        let (a, b) = trace.metrics_window();
        thd_broadband(&trace.i_a[a..b], trace.dt, 50.0).unwrap()
    };
    let proposed: Vec<f64> = grid.iter().map(|&m| thd_of("proposed", m)).collect();
    let at_095 = *proposed.last().unwrap();
    c.check(
        (0.033..=0.073).contains(&at_095),
        format!("proposed THD at m=0.95: {:.2}%", at_095 * 100.0),
    );
    let lo = proposed.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = proposed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    c.check(
        hi - lo < 0.02,
        format!(
            "proposed THD flat over m in [0.3, 0.95]: spread {:.2} pp",
            (hi - lo) * 100.0
        ),
    );
    let p04 = proposed[2];
    let s04 = thd_of("svpwm", 0.4);
    let d04 = thd_of("dpwm", 0.4);
    c.check(
        s04 >= 2.0 * p04,
        format!(
            "svpwm at m=0.4: {:.2}% vs 2x proposed {:.2}% (ratio {:.2})",
            s04 * 100.0,
            2.0 * p04 * 100.0,
            s04 / p04
        ),
    );
    c.check(
        d04 >= 3.0 * p04,
        format!(
            "dpwm at m=0.4: {:.2}% vs 3x proposed {:.2}% (ratio {:.2})",
            d04 * 100.0,
            3.0 * p04 * 100.0,
            d04 / p04
        ),
    );
    c.finish();
}

#[test]
fn criterion_07_loss_ordering() {
    let mut c = Clauses::new("criterion 7: loss ordering");
    let base = parse_scenario(&fullscale_doc("proposed", 0.95)).unwrap();
    let rows = run_comparison(&base, &[0.5, 0.75, 0.95], &[0.6, 0.9]).unwrap();
    for chunk in rows.chunks(3) {
        let (m, pf) = (chunk[0].m, chunk[0].pf);
        let total = |i: usize| chunk[i].report.as_ref().unwrap().total_loss_w();
        let (p, s, d) = (total(0), total(1), total(2));
        c.check(
            p < d && d < s,
            format!("m={m} pf={pf}: proposed {p:.0} W < dpwm {d:.0} W < svpwm {s:.0} W"),
        );
        if m == 0.95 {
            let ratio = p / s;
            c.check(
                ratio <= 0.65,
                format!("m=0.95 pf={pf}: proposed/svpwm total-loss ratio {ratio:.3}"),
            );
        }
    }
    c.finish();
}

#[test]
fn criterion_08_balancing() {
    let mut c = Clauses::new("criterion 8: balancing");
    let s = parse_scenario(&bench_doc("0.05,0,-0.05,0,0,0,0,0")).unwrap();
    let trace = simulate(&s).unwrap();
    let (a, b) = trace.metrics_window();
    let n = (b - a) as f64;
    let mean = |m: usize| trace.module_current(m)[a..b].iter().sum::<f64>() / n;
    let i_dc = trace.i_l[a..b].iter().sum::<f64>() / n;
    let diff13 = (mean(0) - mean(2)) / i_dc;
    c.check(
        (0.04..=0.06).contains(&diff13),
        format!(
            "module-1 minus module-3 mean current: {:.1}% of dc mean (per-module shift vs unbiased peer: {:.1}%)",
            diff13 * 100.0,
            (mean(1) - mean(2)) / i_dc * 100.0
        ),
    );
    let s0 = parse_scenario(&bench_doc("0,0,0,0,0,0,0,0")).unwrap();
    let t0 = simulate(&s0).unwrap();
    let f_with = harmonic_magnitude(&trace.i_a[a..b], trace.dt, 50.0, 1);
    let f_without = harmonic_magnitude(&t0.i_a[a..b], t0.dt, 50.0, 1);
    let rel = (f_with - f_without).abs() / f_without;
    c.check(
        rel < 1e-3,
        format!("phase-current fundamental shift with offsets: {rel:.2e}"),
    );
    c.finish();
}

#[test]
fn criterion_09_sur_ordering() {
    let mut c = Clauses::new("criterion 9: SUR ordering");
    let cfg = fig4_backend();
    let filt = FilterParams::new(30e-6, 60e-6);
    let grid: Vec<f64> = (2..=19).map(|k| k as f64 * 0.05).collect();
    let points = sur_study(&cfg, &filt, 3.0, &grid);
    let mut high_ok = true;
    for p in points.iter().filter(|p| p.m_dc >= 0.7 - 1e-9) {
        if p.sur_chb <= p.sur_buck {
            high_ok = false;
        }
    }
    let high: Vec<String> = points
        .iter()
        .filter(|p| p.m_dc >= 0.7 - 1e-9)
        .map(|p| format!("{:.2}:{:+.4}", p.m_dc, p.sur_chb - p.sur_buck))
        .collect();
    c.check(
        high_ok,
        format!("CHB > buck for m_dc >= 0.7 (deltas {})", high.join(" ")),
    );
    let crossover = points
        .iter()
        .filter(|p| p.m_dc < 0.7)
        .any(|p| p.sur_chb < p.sur_buck);
    let low: Vec<String> = points
        .iter()
        .filter(|p| p.m_dc < 0.7)
        .map(|p| format!("{:.2}:{:+.4}", p.m_dc, p.sur_chb - p.sur_buck))
        .collect();
    c.check(
        crossover,
        format!("curves cross below m_dc = 0.7 (deltas {})", low.join(" ")),
    );
    c.finish();
}

#[test]
fn criterion_10_property_suites() {
    let mut c = Clauses::new("criterion 10: property suites");

    // Solver convergence: halving dt moves the steady-state current rms by
    // less than 0.1%.
    let rms_at = |dt: Option<f64>| -> f64 {
        let mut doc = bench_doc("0,0,0,0,0,0,0,0");
        if let Some(dt) = dt {
            doc = doc.replace("[timing]", &format!("[timing]\ndt = {dt}"));
        }
        let s = parse_scenario(&doc).unwrap();
        let trace = simulate(&s).unwrap();
        let (a, b) = trace.metrics_window();
        (trace.i_a[a..b].iter().map(|x| x * x).sum::<f64>() / (b - a) as f64).sqrt()
    };
    let auto = parse_scenario(&bench_doc("0,0,0,0,0,0,0,0")).unwrap().dt();
    let coarse = rms_at(None);
    let fine = rms_at(Some(auto / 2.0));
    let drift = (coarse - fine).abs() / fine;
    c.check(
        drift < 1e-3,
        format!("dt halving moves i_a rms by {:.4}%", drift * 100.0),
    );

    // Charge balance and energy audit on the bench scenario.
    let s = parse_scenario(&bench_doc("0,0,0,0,0,0,0,0")).unwrap();
    let trace = simulate(&s).unwrap();
    let (a, b) = trace.metrics_window();
    let q_err = pulsim::report::charge_balance_error(&trace, &s, a, b);
    c.check(
        q_err < 1e-3,
        format!("dc-link charge balance error {q_err:.2e}"),
    );
    let e_err = pulsim::report::energy_audit_error(&trace, &s, a, b);
    c.check(e_err < 5e-3, format!("energy audit error {e_err:.2e}"));

    // PSC zero ripple at every integer level.
    let cfg = fig4_backend();
    let filt = FilterParams::new(30e-6, 60e-6);
    let mut worst = 0.0f64;
    for j in 1..8 {
        let trace = simulate_dcdc(
            &DcSource::Chb {
                cfg: cfg.clone(),
                m_dc: j as f64 / 8.0,
            },
            &filt,
            3.0,
            10e-3,
            5e-3,
            1.25e-7,
            false,
        );
        let s0 = trace.settle_index();
        let lo = trace.v_out[s0..]
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let hi = trace.v_out[s0..]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(hi - lo);
    }
    c.check(
        worst < 1e-6,
        format!("constant-level residual ripple {worst:.2e} V"),
    );

    // Unified formula vs the per-sector table over 1e5 random triples.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut max_err = 0.0f64;
    let mut tested = 0usize;
    while tested < 100_000 {
        let p = PhaseTriple::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let sector = match identify_sector(&p, 1e-9) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let (unified, degenerate) = frontend_mod_indices(&p, 1e-9);
        assert!(!degenerate);
        let table = sector_table_mod_indices(&p, sector);
        for (u, t) in unified.as_array().iter().zip(table.as_array()) {
            max_err = max_err.max((u - t).abs());
        }
        tested += 1;
    }
    c.check(
        max_err <= 1e-12,
        format!("unified vs sector-table duties over 1e5 triples: max |diff| {max_err:.2e}"),
    );

    // End-to-end byte determinism.
    let run_bytes = || -> (String, String) {
        let s = parse_scenario(&bench_doc("0.05,0,-0.05,0,0,0,0,0")).unwrap();
        let trace = simulate(&s).unwrap();
        let report = pulsim::compute_report(&trace, &s).unwrap();
        let row = pulsim::sweep::MetricsRow {
            strategy: s.strategy.label().to_string(),
            m: s.reference.m,
            pf: report.pf,
            report: Some(report),
            error: String::new(),
        };
        (
            pulsim::artifacts::trace_csv(&trace, 1000),
            pulsim::artifacts::metrics_csv(&[row]),
        )
    };
    let (t1, m1) = run_bytes();
    let (t2, m2) = run_bytes();
    c.check(
        t1 == t2 && m1 == m2,
        format!(
            "repeated runs emit byte-identical artifacts ({} + {} bytes)",
            t1.len(),
            m1.len()
        ),
    );

    // The envelope fundamental phasor of v_dc2 matches the reference through
    // the filter (steady-state tracking).
    let track = pulsim::report::vdc2_tracking_error(&trace, &s);
    c.check(
        track < 0.05,
        format!("v_dc2 low-band tracking error {:.2}% rms", track * 100.0),
    );

    c.finish();
}

/// Supporting check from the loss model: IGBT conduction is strategy-blind
/// at matched current, and the switching-loss ratio tracks the count ratio
/// at moderate power factor.
#[test]
fn loss_ratio_properties() {
    let mut c = Clauses::new("loss ratio properties");
    let base = parse_scenario(&fullscale_doc("proposed", 0.95)).unwrap();
    let rows = run_comparison(&base, &[0.75], &[0.6]).unwrap();
    let rep = |i: usize| rows[i].report.as_ref().unwrap();
    let cond: Vec<f64> = (0..3).map(|i| rep(i).cond_igbt_w).collect();
    let spread = (cond.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - cond.iter().cloned().fold(f64::INFINITY, f64::min))
        / cond[0];
    c.check(
        spread < 0.02,
        format!(
            "IGBT conduction equal across strategies (spread {:.2}%)",
            spread * 100.0
        ),
    );
    let (p, s, d) = (rep(0).sw_igbt_w, rep(1).sw_igbt_w, rep(2).sw_igbt_w);
    let rp = 3.0 * p / s;
    let rd = 1.5 * d / s;
    c.check(
        (rp - 1.0).abs() < 0.15 && (rd - 1.0).abs() < 0.15,
        format!("switching-loss ratio tracks counts at pf 0.6: proposed {rp:.2}, dpwm {rd:.2}"),
    );
    c.check(
        p < d && d < s,
        format!("switching-loss ordering {p:.0} < {d:.0} < {s:.0} W"),
    );
    c.finish();
}

/// Six-pulse cancellation: no fundamental or second-harmonic content in the
/// per-module battery currents.
#[test]
fn module_current_spectrum_is_clean() {
    let mut c = Clauses::new("module-current spectrum");
    let s = parse_scenario(&bench_doc("0,0,0,0,0,0,0,0")).unwrap();
    let trace = simulate(&s).unwrap();
    let (a, b) = trace.metrics_window();
    let mut worst = 0.0f64;
    for module in 0..8 {
        let col = trace.module_current(module);
        let (dc, _) = harmonic_coeff(&col[a..b], trace.dt, 50.0, 0);
        for h in [1usize, 2] {
            let mag = harmonic_magnitude(&col[a..b], trace.dt, 50.0, h);
            worst = worst.max(mag / dc);
        }
    }
    c.check(
        worst < 0.01,
        format!(
            "worst f/2f component {:.3}% of module dc mean",
            worst * 100.0
        ),
    );
    c.finish();
}

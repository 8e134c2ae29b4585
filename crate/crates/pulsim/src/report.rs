//! Post-processing of run records into the comparative metrics table, plus
//! the conservation audits used to validate the solver.
//!
//! All statistics are taken over the trace's metrics window (post-settle,
//! whole fundamental periods). Conduction statistics are window-normalized:
//! a device that conducts `i` for a third of the window contributes
//! `mean(i * on)` and `mean(i^2 * on)` over the whole window, so the loss is
//! already an average power.

use crate::circuit::filter_frequency_response;
use crate::metrics::{
    conduction_loss, harmonic_coeff, sur, switching_loss, switching_ripple, MetricsError,
};
use crate::pwm::switching_counts;
use crate::reference::Phase;
use crate::scenario::{Scenario, Strategy};
use crate::sim::{SimFlags, SimTrace};

/// Comparative metrics of one run.
#[derive(Clone, Debug)]
pub struct MetricsReport {
    pub strategy: Strategy,
    /// Commanded modulation index.
    pub m: f64,
    /// Fundamental displacement power factor measured from the trace.
    pub pf: f64,
    /// Mean power delivered to the load over the window, in watts.
    pub p_out_w: f64,
    pub cond_igbt_w: f64,
    pub sw_igbt_w: f64,
    pub cond_fet_w: f64,
    pub sw_fet_w: f64,
    /// Broadband current THD per phase (all content above the fundamental).
    pub thd: [f64; 3],
    /// Switching ripple of `v_dc2` (zero-to-peak of the residual above the
    /// 0-2 kHz band), in volts.
    pub ripple_v: f64,
    /// Switch utilization ratio of the whole converter.
    pub sur: f64,
    /// Frontend leg commutations per fundamental period.
    pub commutations_frontend: f64,
    /// Backend module state changes per fundamental period.
    pub commutations_backend: f64,
    /// Fundamental rms of the phase-a current, in amperes.
    pub i_fund_rms: f64,
    /// Fundamental rms of the phase-a load voltage, in volts.
    pub v_fund_rms: f64,
    pub flags: SimFlags,
}

impl MetricsReport {
    pub fn total_loss_w(&self) -> f64 {
        self.cond_igbt_w + self.sw_igbt_w + self.cond_fet_w + self.sw_fet_w
    }
}

/// Window-normalized conducted-current statistics of one device.
#[derive(Clone, Copy, Debug, Default)]
struct ConductionStats {
    sum_abs: f64,
    sum_sq: f64,
}

impl ConductionStats {
    fn add(&mut self, i: f64) {
        self.sum_abs += i.abs();
        self.sum_sq += i * i;
    }

    fn i_avg(&self, n: usize) -> f64 {
        self.sum_abs / n as f64
    }

    fn i_rms(&self, n: usize) -> f64 {
        (self.sum_sq / n as f64).sqrt()
    }
}

/// Computes the full metrics report for a simulated scenario.
pub fn compute_report(
    trace: &SimTrace,
    scenario: &Scenario,
) -> Result<MetricsReport, MetricsError> {
    let (a, b) = trace.metrics_window();
    let n = b - a;
    let dt = trace.dt;
    let f0 = trace.f0;
    let window_s = n as f64 * dt;
    let t_start = a as f64 * dt;

    // Per-device conduction statistics: 6 frontend devices (upper/lower per
    // leg), 2 per backend module (series/bypass).
    let mut front = [[ConductionStats::default(); 2]; 3];
    let mut back = vec![[ConductionStats::default(); 2]; trace.n_mdl];
    // Load power, phase-a load voltage for the fundamental phasor.
    let mut p_out = 0.0;
    let mut v_load_a = Vec::with_capacity(n);
    let ramp = scenario.timing.ramp;
    let theta0 = scenario.reference.theta0;
    for k in a..b {
        let t = k as f64 * dt;
        let gates = crate::pwm::GateVector::from_bits(trace.gates[k]);
        let i = [trace.i_a[k], trace.i_b[k], trace.i_c[k]];
        let v_dc2 = trace.v_dc2[k];
        for (leg, stats) in front.iter_mut().enumerate() {
            let hi = gates.as_array()[leg];
            stats[if hi { 0 } else { 1 }].add(i[leg]);
        }
        let mask = trace.series_mask[k];
        for (module, stats) in back.iter_mut().enumerate() {
            let series = mask & (1 << module) != 0;
            stats[if series { 0 } else { 1 }].add(trace.i_l[k]);
        }
        // Load-side instantaneous power: r i^2 + e i per phase.
        let theta = (theta0 + std::f64::consts::TAU * f0 * t).rem_euclid(std::f64::consts::TAU);
        let gain = if ramp > 0.0 { (t / ramp).min(1.0) } else { 1.0 };
        let emf = scenario.load.emf(theta, gain);
        let vt = [
            if gates.a { v_dc2 } else { 0.0 },
            if gates.b { v_dc2 } else { 0.0 },
            if gates.c { v_dc2 } else { 0.0 },
        ];
        let v_n = (vt[0] + vt[1] + vt[2] - emf[0] - emf[1] - emf[2]) / 3.0;
        for x in 0..3 {
            p_out += scenario.load.r * i[x] * i[x] + emf[x] * i[x];
        }
        v_load_a.push(vt[0] - v_n);
    }
    p_out /= n as f64;

    let devices = &scenario.devices;
    let mut cond_igbt = 0.0;
    for leg in &front {
        for stats in leg {
            cond_igbt += conduction_loss(&devices.igbt, stats.i_avg(n), stats.i_rms(n));
        }
    }
    let mut cond_fet = 0.0;
    for module in &back {
        for stats in module {
            cond_fet += conduction_loss(&devices.fet, stats.i_avg(n), stats.i_rms(n));
        }
    }

    let sw_igbt = switching_loss(&trace.events, &devices.igbt, t_start, window_s, f0)?;
    let sw_fet = switching_loss(&trace.events, &devices.fet, t_start, window_s, f0)?;
    let counts = switching_counts(&trace.events, t_start, window_s, f0).map_err(|_| {
        MetricsError::NonIntegerWindow {
            window: window_s,
            f0,
        }
    })?;

    // Broadband THD: the distortion of a hard-switched drive lives in the
    // carrier bands (tens of kHz), far above any small harmonic count.
    let mut thd = [0.0; 3];
    for phase in Phase::ALL {
        let column = trace.phase_current(phase);
        thd[phase.index()] = crate::metrics::thd_broadband(&column[a..b], dt, f0)?;
    }

    let ripple_v = match scenario.strategy {
        Strategy::Proposed => switching_ripple(&trace.v_dc2[a..b], dt, Some(f0), 2e3),
        _ => 0.0,
    };

    // Fundamental phasors of phase-a load voltage and current.
    let (vre, vim) = harmonic_coeff(&v_load_a, dt, f0, 1);
    let (ire, iim) = harmonic_coeff(&trace.i_a[a..b], dt, f0, 1);
    let v1 = (vre * vre + vim * vim).sqrt();
    let i1 = (ire * ire + iim * iim).sqrt();
    let pf = if v1 > 0.0 && i1 > 0.0 {
        let angle = iim.atan2(ire) - vim.atan2(vre);
        angle.cos().abs()
    } else {
        0.0
    };

    // Switch utilization: rated blocking voltage times trace rms per device.
    // Frontend devices are rated for the scenario's maximum dc-link voltage
    // (the envelope peak sqrt(3) * amplitude for the proposed strategy, the
    // fixed link otherwise).
    let v_front = match scenario.strategy {
        Strategy::Proposed => 3.0f64.sqrt() * scenario.amplitude(),
        _ => scenario.vdc_fixed.unwrap_or_default(),
    };
    let mut stresses: Vec<(f64, f64)> = Vec::with_capacity(6 + 2 * trace.n_mdl);
    for leg in &front {
        for stats in leg {
            stresses.push((v_front, stats.i_rms(n)));
        }
    }
    if let Some(bcfg) = &scenario.backend {
        for module in &back {
            for stats in module {
                stresses.push((bcfg.v_mdl, stats.i_rms(n)));
            }
        }
    }
    let sur = sur(p_out, &stresses).unwrap_or(0.0);

    Ok(MetricsReport {
        strategy: scenario.strategy,
        m: scenario.reference.m,
        pf,
        p_out_w: p_out,
        cond_igbt_w: cond_igbt,
        sw_igbt_w: sw_igbt,
        cond_fet_w: cond_fet,
        sw_fet_w: sw_fet,
        thd,
        ripple_v,
        sur,
        commutations_frontend: counts.frontend_per_fundamental,
        commutations_backend: counts.backend_per_fundamental,
        i_fund_rms: i1 / 2.0f64.sqrt(),
        v_fund_rms: v1 / 2.0f64.sqrt(),
        flags: trace.flags,
    })
}

/// Relative dc-link charge-balance error over `[a, b)`:
/// `|sum dt (i_L[k+1] - i_inv[k]) - C dv| / (C * mean |v_dc2|)`.
///
/// The sum uses the solver's own discretization, so this checks that the
/// stored trace and the capacitor update agree.
pub fn charge_balance_error(trace: &SimTrace, scenario: &Scenario, a: usize, b: usize) -> f64 {
    let c = scenario.filter.c;
    let mut q = 0.0;
    let mut v_mean = 0.0;
    for k in a..b.min(trace.len() - 1) {
        let gates = crate::pwm::GateVector::from_bits(trace.gates[k]);
        let i_inv = crate::circuit::inverter_dc_current(
            gates.as_array(),
            [trace.i_a[k], trace.i_b[k], trace.i_c[k]],
        );
        q += trace.dt * (trace.i_l[k + 1] - i_inv);
        v_mean += trace.v_dc2[k].abs();
    }
    let span = b.min(trace.len() - 1) - a;
    v_mean /= span as f64;
    let dv = trace.v_dc2[b.min(trace.len() - 1)] - trace.v_dc2[a];
    (q - c * dv).abs() / (c * v_mean).max(1e-12)
}

/// Relative energy-audit error over `[a, b)`:
/// source energy vs stored-field change plus load dissipation and back-emf
/// work, normalized by the source energy. `v_dc1` already reflects any
/// battery sag, so the balance holds at the default `r_l = 0`; a nonzero
/// filter resistance adds its own unaccounted dissipation.
pub fn energy_audit_error(trace: &SimTrace, scenario: &Scenario, a: usize, b: usize) -> f64 {
    let b = b.min(trace.len() - 1);
    let dt = trace.dt;
    let filt = &scenario.filter;
    let load = &scenario.load;
    let f0 = trace.f0;
    let theta0 = scenario.reference.theta0;
    let ramp = scenario.timing.ramp;
    let mut e_source = 0.0;
    let mut e_load = 0.0;
    // Trapezoidal sums over the stored rows.
    let mut prev_ps = trace.v_dc1[a] * trace.i_l[a];
    let mut prev_pl = {
        let i = [trace.i_a[a], trace.i_b[a], trace.i_c[a]];
        let theta = (theta0 + std::f64::consts::TAU * f0 * (a as f64 * dt))
            .rem_euclid(std::f64::consts::TAU);
        let gain = if ramp > 0.0 {
            ((a as f64 * dt) / ramp).min(1.0)
        } else {
            1.0
        };
        let emf = load.emf(theta, gain);
        (0..3)
            .map(|x| load.r * i[x] * i[x] + emf[x] * i[x])
            .sum::<f64>()
    };
    for k in a + 1..=b {
        let t = k as f64 * dt;
        let ps = trace.v_dc1[k] * trace.i_l[k];
        e_source += 0.5 * (ps + prev_ps) * dt;
        prev_ps = ps;
        let i = [trace.i_a[k], trace.i_b[k], trace.i_c[k]];
        let theta = (theta0 + std::f64::consts::TAU * f0 * t).rem_euclid(std::f64::consts::TAU);
        let gain = if ramp > 0.0 { (t / ramp).min(1.0) } else { 1.0 };
        let emf = load.emf(theta, gain);
        let pl = (0..3)
            .map(|x| load.r * i[x] * i[x] + emf[x] * i[x])
            .sum::<f64>();
        e_load += 0.5 * (pl + prev_pl) * dt;
        prev_pl = pl;
    }
    let stored = |k: usize| {
        let i = [trace.i_a[k], trace.i_b[k], trace.i_c[k]];
        0.5 * filt.l * trace.i_l[k] * trace.i_l[k]
            + 0.5 * filt.c * trace.v_dc2[k] * trace.v_dc2[k]
            + 0.5 * load.l * i.iter().map(|x| x * x).sum::<f64>()
    };
    let delta_stored = stored(b) - stored(a);
    let err = e_source - delta_stored - e_load;
    err.abs() / e_source.abs().max(1e-9)
}

/// Relative rms mismatch between the low band (0-2 kHz) of the measured
/// `v_dc2` and the reference envelope with the filter's gain and phase
/// applied per harmonic. The effective damping resistance is taken from the
/// operating point (`mean(v_dc2)^2 / P_load`).
pub fn vdc2_tracking_error(trace: &SimTrace, scenario: &Scenario) -> f64 {
    let (a, b) = trace.metrics_window();
    let dt = trace.dt;
    let f0 = trace.f0;
    let n = b - a;
    // Reference envelope over the window.
    let mut env = Vec::with_capacity(n);
    for k in a..b {
        let t = k as f64 * dt;
        let theta = (scenario.reference.theta0 + std::f64::consts::TAU * f0 * t)
            .rem_euclid(std::f64::consts::TAU);
        let refs = crate::reference::gen_three_phase_refs(&crate::reference::ReferenceState::new(
            scenario.amplitude(),
            f0,
            theta,
            scenario.reference.m,
        ));
        env.push(crate::reference::envelope_dc_ref(&refs));
    }
    let mut p_out = 0.0;
    let mut v_mean = 0.0;
    for k in a..b {
        let i = [trace.i_a[k], trace.i_b[k], trace.i_c[k]];
        p_out += scenario.load.r * i.iter().map(|x| x * x).sum::<f64>();
        v_mean += trace.v_dc2[k];
    }
    p_out /= n as f64;
    v_mean /= n as f64;
    let mut filt = scenario.filter;
    filt.r_eq = if p_out > 1e-9 {
        v_mean * v_mean / p_out
    } else {
        f64::INFINITY
    };

    let h_max = (2e3 / f0).floor() as usize;
    let mut err_sq = 0.0;
    let mut ref_sq = 0.0;
    for h in 0..=h_max {
        let (mre, mim) = harmonic_coeff(&trace.v_dc2[a..b], dt, f0, h);
        let (ere, eim) = harmonic_coeff(&env, dt, f0, h);
        let (hre, him) = if h == 0 {
            (1.0, 0.0)
        } else {
            let resp = filter_frequency_response(&filt, h as f64 * f0);
            let ph = resp.phase_deg.to_radians();
            (resp.gain * ph.cos(), resp.gain * ph.sin())
        };
        // Expected phasor: H * E (phasor convention x ~ re cos - im sin).
        let xre = hre * ere - him * eim;
        let xim = hre * eim + him * ere;
        let w = if h == 0 { 1.0 } else { 0.5 };
        err_sq += w * ((mre - xre).powi(2) + (mim - xim).powi(2));
        ref_sq += w * (xre * xre + xim * xim);
    }
    (err_sq / ref_sq).sqrt()
}

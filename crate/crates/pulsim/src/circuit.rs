//! Fixed-step solver for the switched network: backend source, dc-link L-C
//! filter, two-level inverter, three-phase R-L (+back-emf) load.
//!
//! Integration is semi-implicit: the inductor current update is implicit in
//! its own resistive drop and uses the old capacitor voltage, the capacitor
//! update uses the fresh inductor current, and the load currents use the
//! fresh capacitor voltage. Switches are ideal in the circuit solution; all
//! device drops live in the loss model.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("state blew up at t={t:.6e}s: |{quantity}| = {value:.3e} exceeds {limit:.3e}")]
    NumericalBlowup {
        t: f64,
        quantity: &'static str,
        value: f64,
        limit: f64,
    },
}

/// Dc-link filter between the backend string and the inverter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterParams {
    /// Inductance in henries.
    pub l: f64,
    /// Capacitance in farads.
    pub c: f64,
    /// Inductor series resistance in ohms.
    pub r_l: f64,
    /// Equivalent frontend load in ohms, used only by the small-signal
    /// frequency response.
    pub r_eq: f64,
}

impl FilterParams {
    pub fn new(l: f64, c: f64) -> Self {
        Self {
            l,
            c,
            r_l: 0.0,
            r_eq: 0.0,
        }
    }

    /// Undamped resonance of the L-C pair in Hz.
    pub fn resonance_hz(&self) -> f64 {
        1.0 / (std::f64::consts::TAU * (self.l * self.c).sqrt())
    }
}

/// Three-phase load model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LoadKind {
    /// Passive series R-L per phase.
    SeriesRl,
    /// Series R-L with a balanced sinusoidal back-emf (motor surrogate).
    RlBackEmf,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoadSpec {
    pub kind: LoadKind,
    /// Resistance per phase in ohms.
    pub r: f64,
    /// Inductance per phase in henries.
    pub l: f64,
    /// Back-emf peak amplitude in volts (ignored for `SeriesRl`).
    pub backemf: f64,
    /// Back-emf lag behind the reference angle in radians; together with the
    /// R-L impedance this sets the displacement power factor.
    pub backemf_phase: f64,
}

impl LoadSpec {
    pub fn series_rl(r: f64, l: f64) -> Self {
        Self {
            kind: LoadKind::SeriesRl,
            r,
            l,
            backemf: 0.0,
            backemf_phase: 0.0,
        }
    }

    /// Displacement power factor of the passive impedance at frequency `f`.
    pub fn displacement_pf(&self, f: f64) -> f64 {
        let x = std::f64::consts::TAU * f * self.l;
        self.r / (self.r * self.r + x * x).sqrt()
    }

    /// Balanced back-emf triple at reference angle `theta`, scaled by `gain`
    /// (used for spin-up ramps).
    pub fn emf(&self, theta: f64, gain: f64) -> [f64; 3] {
        if self.kind == LoadKind::SeriesRl || self.backemf == 0.0 {
            return [0.0; 3];
        }
        let amp = self.backemf * gain;
        let th = theta - self.backemf_phase;
        let third = std::f64::consts::TAU / 3.0;
        [
            amp * th.sin(),
            amp * (th - third).sin(),
            amp * (th + third).sin(),
        ]
    }
}

/// Electrical state advanced by the solver.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CircuitState {
    /// Dc-link inductor current in amperes.
    pub i_l: f64,
    /// Dc-link capacitor voltage in volts.
    pub v_dc2: f64,
    /// Phase currents in amperes; their sum is held at zero exactly by
    /// solving two branches and deriving the third.
    pub i_a: f64,
    pub i_b: f64,
    pub i_c: f64,
}

impl CircuitState {
    pub fn phase_currents(&self) -> [f64; 3] {
        [self.i_a, self.i_b, self.i_c]
    }
}

/// Inverter dc-side current for the given gates: sum of the phase currents
/// of the legs whose upper device conducts.
pub fn inverter_dc_current(gates: [bool; 3], i: [f64; 3]) -> f64 {
    let mut s = 0.0;
    for k in 0..3 {
        if gates[k] {
            s += i[k];
        }
    }
    s
}

/// One integration step of the full network.
///
/// `v_oc` is the backend open-circuit string voltage and `r_src` its series
/// resistance (both already reflect the inserted modules); the realized
/// terminal voltage is `v_oc - r_src * i_l_new`. `emf` is the per-phase
/// back-emf. `i_l_new` is returned inside the state; the caller derives
/// `v_dc1` for reporting.
#[allow(clippy::too_many_arguments)]
pub fn step(
    state: &CircuitState,
    v_oc: f64,
    r_src: f64,
    gates: [bool; 3],
    filt: &FilterParams,
    load: &LoadSpec,
    emf: [f64; 3],
    dt: f64,
) -> CircuitState {
    // Dc-link inductor, implicit in the series resistance.
    let i_l =
        (state.i_l + dt / filt.l * (v_oc - state.v_dc2)) / (1.0 + dt * (filt.r_l + r_src) / filt.l);
    // Dc-link capacitor, fed by the fresh inductor current.
    let i_inv = inverter_dc_current(gates, state.phase_currents());
    let v_dc2 = state.v_dc2 + dt / filt.c * (i_l - i_inv);
    // Load branches against the floating neutral.
    let (i_a, i_b) = load_step(state, gates, v_dc2, load, emf, dt);
    CircuitState {
        i_l,
        v_dc2,
        i_a,
        i_b,
        i_c: -i_a - i_b,
    }
}

/// Load-only update used both by [`step`] and by the stiff-dc-link solver
/// (fixed `v_dc2`). Returns the two independent phase currents.
pub fn load_step(
    state: &CircuitState,
    gates: [bool; 3],
    v_dc2: f64,
    load: &LoadSpec,
    emf: [f64; 3],
    dt: f64,
) -> (f64, f64) {
    let vt = [
        if gates[0] { v_dc2 } else { 0.0 },
        if gates[1] { v_dc2 } else { 0.0 },
        if gates[2] { v_dc2 } else { 0.0 },
    ];
    // Floating neutral of a balanced star: the choice that keeps the branch
    // updates summing to zero.
    let v_n = (vt[0] + vt[1] + vt[2] - emf[0] - emf[1] - emf[2]) / 3.0;
    if load.l > 0.0 {
        let denom = 1.0 + dt * load.r / load.l;
        let i_a = (state.i_a + dt / load.l * (vt[0] - v_n - emf[0])) / denom;
        let i_b = (state.i_b + dt / load.l * (vt[1] - v_n - emf[1])) / denom;
        (i_a, i_b)
    } else {
        // Pure resistive load: algebraic branch currents.
        (
            (vt[0] - v_n - emf[0]) / load.r,
            (vt[1] - v_n - emf[1]) / load.r,
        )
    }
}

/// Guards against runaway states; limits are scaled from the scenario's
/// nominal voltage and current.
pub fn check_state(
    state: &CircuitState,
    t: f64,
    v_nominal: f64,
    i_nominal: f64,
) -> Result<(), CircuitError> {
    let v_lim = 1e6 * v_nominal.max(1.0);
    let i_lim = 1e6 * i_nominal.max(1.0);
    let checks: [(&'static str, f64, f64); 5] = [
        ("v_dc2", state.v_dc2, v_lim),
        ("i_L", state.i_l, i_lim),
        ("i_a", state.i_a, i_lim),
        ("i_b", state.i_b, i_lim),
        ("i_c", state.i_c, i_lim),
    ];
    for (name, value, limit) in checks {
        if !value.is_finite() || value.abs() > limit {
            return Err(CircuitError::NumericalBlowup {
                t,
                quantity: name,
                value,
                limit,
            });
        }
    }
    Ok(())
}

/// Small-signal response of the dc-link filter loaded by `r_eq`:
/// `H(jw) = r_eq / (r_eq (1 - w^2 L C) + j w L)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterResponse {
    /// Magnitude of the voltage transfer, dimensionless.
    pub gain: f64,
    /// Phase shift in degrees (negative = lag).
    pub phase_deg: f64,
    /// Set when the evaluation sits on an effectively undamped resonance.
    pub resonance_warning: bool,
}

/// Evaluates the filter transfer at frequency `f` in Hz.
///
/// `f -> 0` gives unity gain and zero phase. With `r_eq` effectively absent
/// the gain is unbounded at resonance and the warning flag is set.
pub fn filter_frequency_response(filt: &FilterParams, f: f64) -> FilterResponse {
    debug_assert!(f > 0.0);
    let w = std::f64::consts::TAU * f;
    let one_minus = 1.0 - w * w * filt.l * filt.c;
    let wl = w * filt.l;
    if filt.r_eq.is_infinite() || filt.r_eq <= 0.0 {
        // Unloaded filter: H = 1 / (1 - w^2 L C).
        let warn = one_minus.abs() < 1e-6;
        let gain = if warn {
            f64::INFINITY
        } else {
            1.0 / one_minus.abs()
        };
        let phase = if one_minus >= 0.0 { 0.0 } else { -180.0 };
        return FilterResponse {
            gain,
            phase_deg: phase,
            resonance_warning: warn,
        };
    }
    let re = filt.r_eq * one_minus;
    let im = wl;
    let mag = filt.r_eq / (re * re + im * im).sqrt();
    let phase = -(im.atan2(re)).to_degrees();
    FilterResponse {
        gain: mag,
        phase_deg: phase,
        resonance_warning: one_minus.abs() < 1e-6 && filt.r_eq > 1e9,
    }
}

//! Cascaded reconfigurable battery backend.
//!
//! Each module is a battery subunit behind a half-bridge that either inserts
//! the subunit in series with the string or bypasses it. A phase-shifted
//! carrier (PSC) scheme compares the backend modulation index against one
//! triangle carrier per module, so the string output
//! `v_dc1 = n_series * V_mdl` steps at `N` times the per-module frequency.
//! Sum-zero duty offsets shift load between modules without disturbing the
//! output.

use crate::carrier::{duty_on, unipolar_triangle};
use crate::reference::PhaseTriple;

/// Largest supported module count (states are packed into a `u32` mask).
pub const MAX_MODULES: usize = 32;

/// Switching state of one backend module.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModuleState {
    Series,
    Bypass,
}

/// One battery module: subunit open-circuit voltage, internal resistance,
/// capacity for coulomb counting, and its carrier phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModuleSpec {
    /// Subunit open-circuit voltage in volts.
    pub v_mdl: f64,
    /// Internal resistance in ohms (constant sag model).
    pub r_int: f64,
    /// Capacity in ampere-hours.
    pub capacity_ah: f64,
    /// Carrier offset as a fraction of one carrier period, `[0, 1)`. Module
    /// `k` of a uniform backend sits at `(k-1)/N`; fractions keep the
    /// interleaved carriers exact at shared crossings.
    pub carrier_phase: f64,
}

/// Backend configuration: the module list plus the shared per-module carrier
/// frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct BackendConfig {
    /// Per-module carrier frequency in Hz.
    pub f_mdl: f64,
    pub modules: Vec<ModuleSpec>,
}

impl BackendConfig {
    /// Uniform backend of `n` identical modules with carriers interleaved at
    /// `(k-1)/n` of a period, which maximizes the effective string frequency
    /// `n * f_mdl`.
    pub fn uniform(n: usize, v_mdl: f64, r_int: f64, capacity_ah: f64, f_mdl: f64) -> Self {
        assert!(
            (1..=MAX_MODULES).contains(&n),
            "module count {n} out of range"
        );
        let modules = (0..n)
            .map(|k| ModuleSpec {
                v_mdl,
                r_int,
                capacity_ah,
                carrier_phase: k as f64 / n as f64,
            })
            .collect();
        Self { f_mdl, modules }
    }

    pub fn n_mdl(&self) -> usize {
        self.modules.len()
    }

    /// Total string voltage with every module in series, `sum V_mdl`.
    pub fn v_total(&self) -> f64 {
        self.modules.iter().map(|m| m.v_mdl).sum()
    }
}

/// Per-module series/bypass states plus balancing offsets and state of
/// charge.
#[derive(Clone, Debug, PartialEq)]
pub struct BackendState {
    pub states: Vec<ModuleState>,
    /// Sum-zero per-module duty offsets.
    pub offsets: Vec<f64>,
    /// State of charge per module, each in `[0, 1]`.
    pub soc: Vec<f64>,
}

impl BackendState {
    pub fn new(n: usize, offsets: Vec<f64>, soc0: f64) -> Self {
        assert_eq!(offsets.len(), n);
        Self {
            states: vec![ModuleState::Bypass; n],
            offsets,
            soc: vec![soc0; n],
        }
    }

    pub fn n_series(&self) -> usize {
        self.states
            .iter()
            .filter(|s| **s == ModuleState::Series)
            .count()
    }
}

/// Backend modulation index `m_dc = envelope / (N * V_mdl)`, clamped to
/// `[0, 1]`; the flag reports overmodulation.
pub fn backend_mod_index(p: &PhaseTriple, cfg: &BackendConfig) -> (f64, bool) {
    let env = crate::reference::envelope_dc_ref(p);
    mod_index_from_envelope(env, cfg)
}

/// Same as [`backend_mod_index`] but starting from an already computed
/// envelope voltage.
pub fn mod_index_from_envelope(envelope: f64, cfg: &BackendConfig) -> (f64, bool) {
    let m = envelope / cfg.v_total();
    if m > 1.0 {
        (1.0, true)
    } else {
        (m.max(0.0), false)
    }
}

/// Series/bypass mask at time `t`: module `k` is series iff
/// `m_dc + offset_k >= C_k(t)` (ties resolved on the falling carrier
/// segment). Bit `k` set means series.
pub fn psc_state_mask(m_dc: f64, t: f64, cfg: &BackendConfig, offsets: &[f64]) -> u32 {
    debug_assert!(cfg.n_mdl() <= MAX_MODULES);
    let mut mask = 0u32;
    for (k, module) in cfg.modules.iter().enumerate() {
        let duty = (m_dc + offsets.get(k).copied().unwrap_or(0.0)).clamp(0.0, 1.0);
        let c = unipolar_triangle(t, cfg.f_mdl, module.carrier_phase);
        if duty_on(duty, c) {
            mask |= 1 << k;
        }
    }
    mask
}

/// Phase-shifted-carrier comparison as module states.
pub fn psc_states(m_dc: f64, t: f64, cfg: &BackendConfig, offsets: &[f64]) -> Vec<ModuleState> {
    let mask = psc_state_mask(m_dc, t, cfg, offsets);
    (0..cfg.n_mdl())
        .map(|k| {
            if mask & (1 << k) != 0 {
                ModuleState::Series
            } else {
                ModuleState::Bypass
            }
        })
        .collect()
}

/// String voltage for a series mask: sum over inserted modules of
/// `v_mdl - i_dc * r_int`. Reduces to `n_series * V_mdl` at zero internal
/// resistance.
pub fn vdc1_from_mask(mask: u32, cfg: &BackendConfig, i_dc: f64) -> f64 {
    let mut v = 0.0;
    for (k, module) in cfg.modules.iter().enumerate() {
        if mask & (1 << k) != 0 {
            v += module.v_mdl - i_dc * module.r_int;
        }
    }
    v
}

/// String voltage from explicit module states.
pub fn vdc1_from_states(states: &[ModuleState], cfg: &BackendConfig, i_dc: f64) -> f64 {
    let mut mask = 0u32;
    for (k, s) in states.iter().enumerate() {
        if *s == ModuleState::Series {
            mask |= 1 << k;
        }
    }
    vdc1_from_mask(mask, cfg, i_dc)
}

/// Open-circuit series voltage and total series internal resistance for a
/// mask; the solver folds the resistance into its implicit current update.
pub fn series_source(mask: u32, cfg: &BackendConfig) -> (f64, f64) {
    let mut v_oc = 0.0;
    let mut r_ser = 0.0;
    for (k, module) in cfg.modules.iter().enumerate() {
        if mask & (1 << k) != 0 {
            v_oc += module.v_mdl;
            r_ser += module.r_int;
        }
    }
    (v_oc, r_ser)
}

/// Power shifted onto module `k` by a duty offset: `dp = dm * V_mdl * i`.
/// Positive values load the module more heavily.
pub fn module_power_shift(dm: f64, v_mdl: f64, i: f64) -> f64 {
    dm * v_mdl * i
}

/// Coulomb-counting state-of-charge update. Series modules carry `i_dc`
/// (positive discharging), bypassed modules carry zero. Returns true when any
/// module clamps at 0 or 1.
pub fn update_soc(
    state: &mut BackendState,
    mask: u32,
    i_dc: f64,
    dt: f64,
    cfg: &BackendConfig,
) -> bool {
    debug_assert!(dt > 0.0);
    let mut clamped = false;
    for (k, soc) in state.soc.iter_mut().enumerate() {
        if mask & (1 << k) != 0 {
            *soc -= i_dc * dt / (3600.0 * cfg.modules[k].capacity_ah);
            if *soc <= 0.0 {
                *soc = 0.0;
                clamped = true;
            } else if *soc >= 1.0 {
                *soc = 1.0;
                clamped = true;
            }
        }
    }
    clamped
}

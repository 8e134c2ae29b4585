//! Modulation reference generation for the three strategies.
//!
//! The proposed pulsating-dc-link scheme drives the dc link to the envelope of
//! the three phase references, `max{v_a,v_b,v_c} - min{v_a,v_b,v_c}`, and
//! modulates exactly one inverter leg at a time. The active 60-degree sector
//! is picked by the largest line-to-line voltage, and the per-leg duty
//! references come from the unified ratio
//!
//! ```text
//! m_x = (v_x - min{v_a,v_b,v_c}) / (max{v_a,v_b,v_c} - min{v_a,v_b,v_c})
//! ```
//!
//! which always pins one leg at 1, one at 0, and leaves one modulating.
//! The SVPWM and DPWM baselines for a fixed dc link live here too, so every
//! strategy produces the same `ModTriple` duty interface.

use std::f64::consts::TAU;
use thiserror::Error;

/// Errors from reference-domain operations.
#[derive(Debug, Error, PartialEq)]
pub enum ReferenceError {
    /// Envelope below the degeneracy threshold; no sector is defined.
    #[error(
        "degenerate reference: envelope {envelope:.3e} V is below threshold {threshold:.3e} V"
    )]
    DegenerateReference { envelope: f64, threshold: f64 },
}

/// Phase identifiers for the three-phase quantities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        match self {
            Phase::A => 0,
            Phase::B => 1,
            Phase::C => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Phase::A => "a",
            Phase::B => "b",
            Phase::C => "c",
        }
    }
}

/// Instantaneous three-phase reference (or measured) voltages in volts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseTriple {
    pub va: f64,
    pub vb: f64,
    pub vc: f64,
}

impl PhaseTriple {
    pub fn new(va: f64, vb: f64, vc: f64) -> Self {
        Self { va, vb, vc }
    }

    pub fn get(&self, phase: Phase) -> f64 {
        match phase {
            Phase::A => self.va,
            Phase::B => self.vb,
            Phase::C => self.vc,
        }
    }

    pub fn max(&self) -> f64 {
        self.va.max(self.vb).max(self.vc)
    }

    pub fn min(&self) -> f64 {
        self.va.min(self.vb).min(self.vc)
    }

    pub fn is_finite(&self) -> bool {
        self.va.is_finite() && self.vb.is_finite() && self.vc.is_finite()
    }
}

/// Amplitude, frequency and phase bookkeeping for the reference generator.
///
/// `modulation_index` is the ratio of `amplitude` to the strategy's maximum
/// linear amplitude (`v_dc/sqrt(3)` for all three strategies at a matched
/// total bus voltage).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceState {
    /// Peak phase amplitude in volts.
    pub amplitude: f64,
    /// Electrical frequency in Hz.
    pub frequency: f64,
    /// Electrical angle in radians, kept in `[0, 2*pi)`.
    pub theta: f64,
    /// Commanded modulation index (dimensionless).
    pub modulation_index: f64,
}

impl ReferenceState {
    pub fn new(amplitude: f64, frequency: f64, theta: f64, modulation_index: f64) -> Self {
        Self {
            amplitude,
            frequency,
            theta: theta.rem_euclid(TAU),
            modulation_index,
        }
    }

    /// Advances the electrical angle by one step, wrapped into `[0, 2*pi)` to
    /// avoid precision drift over long runs.
    pub fn advance(&mut self, dt: f64) {
        self.theta += TAU * self.frequency * dt;
        if self.theta >= TAU {
            self.theta -= TAU;
        }
    }
}

/// The six 60-degree sectors, identified by the largest line voltage.
///
/// Progression in time over one fundamental is VI, I, II, III, IV, V.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sector {
    I,
    II,
    III,
    IV,
    V,
    VI,
}

impl Sector {
    pub const ALL: [Sector; 6] = [
        Sector::I,
        Sector::II,
        Sector::III,
        Sector::IV,
        Sector::V,
        Sector::VI,
    ];

    /// 1-based sector id (`I` is 1).
    pub fn id(self) -> u8 {
        match self {
            Sector::I => 1,
            Sector::II => 2,
            Sector::III => 3,
            Sector::IV => 4,
            Sector::V => 5,
            Sector::VI => 6,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Sector::ALL.get(id.checked_sub(1)? as usize).copied()
    }
}

/// Per-leg duty references.
///
/// For the proposed strategy each component lies in `[0, 1]`; for the bipolar
/// baselines the pre-offset references lie in `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModTriple {
    pub ma: f64,
    pub mb: f64,
    pub mc: f64,
}

impl ModTriple {
    pub fn new(ma: f64, mb: f64, mc: f64) -> Self {
        Self { ma, mb, mc }
    }

    pub fn get(&self, phase: Phase) -> f64 {
        match phase {
            Phase::A => self.ma,
            Phase::B => self.mb,
            Phase::C => self.mc,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.ma, self.mb, self.mc]
    }

    pub fn max(&self) -> f64 {
        self.ma.max(self.mb).max(self.mc)
    }

    pub fn min(&self) -> f64 {
        self.ma.min(self.mb).min(self.mc)
    }
}

/// Synthesizes balanced sinusoidal references:
/// `v_a = M sin(theta)`, `v_b = M sin(theta - 2*pi/3)`, `v_c = M sin(theta + 2*pi/3)`.
pub fn gen_three_phase_refs(state: &ReferenceState) -> PhaseTriple {
    let m = state.amplitude;
    let th = state.theta;
    PhaseTriple {
        va: m * th.sin(),
        vb: m * (th - TAU / 3.0).sin(),
        vc: m * (th + TAU / 3.0).sin(),
    }
}

/// Envelope dc-link reference: `max{v_a,v_b,v_c} - min{v_a,v_b,v_c}`.
///
/// Equals the largest of the six signed line voltages and is nonnegative.
/// For balanced references it pulsates at six times the fundamental between
/// `1.5 M` and `sqrt(3) M`.
pub fn envelope_dc_ref(p: &PhaseTriple) -> f64 {
    p.max() - p.min()
}

/// The six signed line voltages in sector order:
/// `[v_ac, v_bc, v_ba, v_ca, v_cb, v_ab]` for sectors I..VI.
fn line_voltages(p: &PhaseTriple) -> [f64; 6] {
    [
        p.va - p.vc, // I
        p.vb - p.vc, // II
        p.vb - p.va, // III
        p.vc - p.va, // IV
        p.vc - p.vb, // V
        p.va - p.vb, // VI
    ]
}

/// Identifies the active sector as the one whose line voltage is largest.
///
/// Ties at sector boundaries resolve to the smallest sector id among the
/// maxima; no hysteresis is applied.
pub fn identify_sector(p: &PhaseTriple, eps_env: f64) -> Result<Sector, ReferenceError> {
    let env = envelope_dc_ref(p);
    if env <= eps_env {
        return Err(ReferenceError::DegenerateReference {
            envelope: env,
            threshold: eps_env,
        });
    }
    let lines = line_voltages(p);
    let mut best = 0usize;
    for (i, &v) in lines.iter().enumerate().skip(1) {
        if v > lines[best] {
            best = i;
        }
    }
    Ok(Sector::ALL[best])
}

/// Per-leg duty references for the proposed strategy (unified ratio form).
///
/// One component is exactly 1, one exactly 0, and one modulates in `(0, 1)`
/// except at sector boundaries. A degenerate envelope yields `(0.5, 0.5, 0.5)`
/// with the flag set, which keeps the simulator alive through zero-voltage
/// start-up.
pub fn frontend_mod_indices(p: &PhaseTriple, eps_env: f64) -> (ModTriple, bool) {
    let vmax = p.max();
    let vmin = p.min();
    let env = vmax - vmin;
    if env <= eps_env {
        return (ModTriple::new(0.5, 0.5, 0.5), true);
    }
    (
        ModTriple {
            ma: (p.va - vmin) / env,
            mb: (p.vb - vmin) / env,
            mc: (p.vc - vmin) / env,
        },
        false,
    )
}

/// DPWM common-mode offset for bipolar references in `[-1, 1]`:
/// `1 - max{m}` when `max{m} > -min{m}`, else `-(1 + min{m})`.
///
/// Adding the offset clamps exactly one phase to +1 or -1, so a third of the
/// switch transitions disappear.
pub fn dpwm_common_mode(m: &ModTriple) -> f64 {
    let mx = m.max();
    let mn = m.min();
    if mx > -mn {
        1.0 - mx
    } else {
        -(1.0 + mn)
    }
}

/// SVPWM duty references: min-max common-mode injection mapped onto `[0, 1]`,
/// `m_x = v_x/v_dc - (max{v} + min{v})/(2 v_dc) + 0.5`.
///
/// Out-of-range components are clamped and flagged as overmodulation.
pub fn svpwm_refs(p: &PhaseTriple, vdc: f64) -> (ModTriple, bool) {
    debug_assert!(vdc > 0.0);
    let cm = (p.max() + p.min()) / (2.0 * vdc);
    let duty = |v: f64| v / vdc - cm + 0.5;
    let raw = [duty(p.va), duty(p.vb), duty(p.vc)];
    // Rounding dust at the exact linear limit is not overmodulation.
    let overmod = raw.iter().any(|&d| !(-1e-9..=1.0 + 1e-9).contains(&d));
    let clamp = |d: f64| d.clamp(0.0, 1.0);
    (
        ModTriple::new(clamp(raw[0]), clamp(raw[1]), clamp(raw[2])),
        overmod,
    )
}

/// DPWM duty references on `[0, 1]`: bipolar references `2 v_x / v_dc` plus
/// the common-mode offset, with the clamped phase set to its rail exactly.
pub fn dpwm_refs(p: &PhaseTriple, vdc: f64) -> (ModTriple, bool) {
    debug_assert!(vdc > 0.0);
    let bip = ModTriple::new(2.0 * p.va / vdc, 2.0 * p.vb / vdc, 2.0 * p.vc / vdc);
    let off = dpwm_common_mode(&bip);
    let mx = bip.max();
    let mn = bip.min();
    let clamp_high = mx > -mn;
    let mut overmod = false;
    let mut shifted = [0.0f64; 3];
    for (i, r) in bip.as_array().into_iter().enumerate() {
        // Pin the clamped phase to its rail exactly rather than relying on
        // r + (1 - r) rounding to 1.
        let s = if clamp_high && r == mx {
            1.0
        } else if !clamp_high && r == mn {
            -1.0
        } else {
            let s = r + off;
            if !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&s) {
                overmod = true;
            }
            s.clamp(-1.0, 1.0)
        };
        shifted[i] = s;
    }
    (
        ModTriple::new(
            (shifted[0] + 1.0) / 2.0,
            (shifted[1] + 1.0) / 2.0,
            (shifted[2] + 1.0) / 2.0,
        ),
        overmod,
    )
}

/// Table of per-sector duty references (the unified ratio written out per
/// sector). Used as the independent route for checking
/// [`frontend_mod_indices`].
pub fn sector_table_mod_indices(p: &PhaseTriple, sector: Sector) -> ModTriple {
    let env = envelope_dc_ref(p);
    let (va, vb, vc) = (p.va, p.vb, p.vc);
    match sector {
        // max line v_ac: a is max, c is min
        Sector::I => ModTriple::new(1.0, (vb - vc) / env, 0.0),
        // v_bc: b max, c min
        Sector::II => ModTriple::new((va - vc) / env, 1.0, 0.0),
        // v_ba: b max, a min
        Sector::III => ModTriple::new(0.0, 1.0, (vc - va) / env),
        // v_ca: c max, a min
        Sector::IV => ModTriple::new(0.0, (vb - va) / env, 1.0),
        // v_cb: c max, b min
        Sector::V => ModTriple::new((va - vb) / env, 0.0, 1.0),
        // v_ab: a max, b min
        Sector::VI => ModTriple::new(1.0, 0.0, (vc - vb) / env),
    }
}

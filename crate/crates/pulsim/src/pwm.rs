//! Gate generation for the six frontend switches and switching-event
//! extraction for loss accounting.
//!
//! Every leg compares its duty reference against one shared unipolar triangle
//! carrier. Legs pinned at duty 1 or 0 never toggle, which is how the
//! envelope-tracking strategy keeps two of the three legs quiet at any
//! moment. Each leg commutation is one device turn-on plus one device
//! turn-off; counts and ratios are computed on commutations.

use crate::carrier::{duty_on, unipolar_triangle};
use crate::reference::{ModTriple, Phase};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PwmError {
    #[error(
        "window of {window:.6} s does not cover an integer number of {fundamental} Hz periods"
    )]
    NonIntegerWindow { window: f64, fundamental: f64 },
}

/// Gate state of the three inverter legs; `true` means the upper device
/// conducts (the lower is complementary by construction, so no shoot-through
/// state is representable).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct GateVector {
    pub a: bool,
    pub b: bool,
    pub c: bool,
}

impl GateVector {
    pub fn get(&self, phase: Phase) -> bool {
        match phase {
            Phase::A => self.a,
            Phase::B => self.b,
            Phase::C => self.c,
        }
    }

    pub fn as_array(&self) -> [bool; 3] {
        [self.a, self.b, self.c]
    }

    /// Packs the three legs into bits 0..2 for compact trace storage.
    pub fn to_bits(&self) -> u8 {
        self.a as u8 | (self.b as u8) << 1 | (self.c as u8) << 2
    }

    pub fn from_bits(bits: u8) -> Self {
        Self {
            a: bits & 1 != 0,
            b: bits & 2 != 0,
            c: bits & 4 != 0,
        }
    }
}

/// Compares the duty references against the shared frontend carrier.
///
/// A leg is high iff its duty beats the carrier; duties of exactly 1 or 0
/// hold their rail for the whole carrier period.
pub fn frontend_gates(m: &ModTriple, t: f64, f_inv: f64) -> GateVector {
    let c = unipolar_triangle(t, f_inv, 0.0);
    GateVector {
        a: duty_on(m.ma, c),
        b: duty_on(m.mb, c),
        c: duty_on(m.mc, c),
    }
}

/// Semiconductor class of a switching site.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeviceClass {
    Igbt,
    Fet,
}

/// Where a switching event happened.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwitchSite {
    /// Frontend inverter leg.
    FrontendLeg(Phase),
    /// Backend module index (0-based).
    BackendModule(u8),
}

/// Which device of the half-bridge and which transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwitchEdge {
    TurnOn,
    TurnOff,
}

/// One device transition with the electrical conditions needed for loss
/// scaling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwitchEvent {
    pub t: f64,
    pub site: SwitchSite,
    pub class: DeviceClass,
    /// True for the upper (series-inserting) device of the half-bridge.
    pub upper: bool,
    pub edge: SwitchEdge,
    /// Voltage the device blocked across the transition, in volts.
    pub v_blocked: f64,
    /// Magnitude of the commutated current, in amperes.
    pub i_conducted: f64,
}

/// Emits the event pair for one frontend leg commutation.
pub fn frontend_commutation(
    events: &mut Vec<SwitchEvent>,
    t: f64,
    phase: Phase,
    now_high: bool,
    v_dc2: f64,
    i_phase: f64,
) {
    let v = v_dc2.max(0.0);
    let i = i_phase.abs();
    // The device that starts conducting turns on; its complement turns off.
    events.push(SwitchEvent {
        t,
        site: SwitchSite::FrontendLeg(phase),
        class: DeviceClass::Igbt,
        upper: now_high,
        edge: SwitchEdge::TurnOn,
        v_blocked: v,
        i_conducted: i,
    });
    events.push(SwitchEvent {
        t,
        site: SwitchSite::FrontendLeg(phase),
        class: DeviceClass::Igbt,
        upper: !now_high,
        edge: SwitchEdge::TurnOff,
        v_blocked: v,
        i_conducted: i,
    });
}

/// Emits the event pair for one backend module state change. The devices
/// block the module voltage and commutate the string current.
pub fn backend_commutation(
    events: &mut Vec<SwitchEvent>,
    t: f64,
    module: u8,
    now_series: bool,
    v_mdl: f64,
    i_dc: f64,
) {
    let i = i_dc.abs();
    events.push(SwitchEvent {
        t,
        site: SwitchSite::BackendModule(module),
        class: DeviceClass::Fet,
        upper: now_series,
        edge: SwitchEdge::TurnOn,
        v_blocked: v_mdl,
        i_conducted: i,
    });
    events.push(SwitchEvent {
        t,
        site: SwitchSite::BackendModule(module),
        class: DeviceClass::Fet,
        upper: !now_series,
        edge: SwitchEdge::TurnOff,
        v_blocked: v_mdl,
        i_conducted: i,
    });
}

/// Extracts backend switch events from a time-ordered stream of series
/// masks; `v_mdl` and `i_dc` are sampled per entry.
pub fn backend_gates(stream: &[(f64, u32, f64)], v_mdl: f64) -> Vec<SwitchEvent> {
    let mut events = Vec::new();
    for win in stream.windows(2) {
        let (_, prev_mask, _) = win[0];
        let (t, mask, i_dc) = win[1];
        let changed = prev_mask ^ mask;
        if changed == 0 {
            continue;
        }
        for k in 0..32u8 {
            if changed & (1 << k) != 0 {
                backend_commutation(&mut events, t, k, mask & (1 << k) != 0, v_mdl, i_dc);
            }
        }
    }
    events
}

/// Commutation totals per device class over a window, normalized per
/// fundamental period.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SwitchingCounts {
    /// Frontend leg commutations per fundamental period.
    pub frontend_per_fundamental: f64,
    /// Backend module state changes per fundamental period.
    pub backend_per_fundamental: f64,
    /// Number of fundamental periods covered by the window.
    pub periods: f64,
}

/// Counts commutations (turn-on events, one per commutation) in
/// `[t_start, t_start + window)`, normalized per fundamental period.
///
/// The window must cover an integer number of fundamental periods.
pub fn switching_counts(
    events: &[SwitchEvent],
    t_start: f64,
    window: f64,
    fundamental: f64,
) -> Result<SwitchingCounts, PwmError> {
    let periods = window * fundamental;
    if (periods - periods.round()).abs() > 1e-6 || periods.round() < 1.0 {
        return Err(PwmError::NonIntegerWindow {
            window,
            fundamental,
        });
    }
    let periods = periods.round();
    let t_end = t_start + window;
    let mut frontend = 0usize;
    let mut backend = 0usize;
    for e in events {
        if e.t < t_start || e.t >= t_end || e.edge != SwitchEdge::TurnOn {
            continue;
        }
        match e.site {
            SwitchSite::FrontendLeg(_) => frontend += 1,
            SwitchSite::BackendModule(_) => backend += 1,
        }
    }
    Ok(SwitchingCounts {
        frontend_per_fundamental: frontend as f64 / periods,
        backend_per_fundamental: backend as f64 / periods,
        periods,
    })
}

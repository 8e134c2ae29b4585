//! Unipolar triangle carriers and the comparator convention shared by the
//! frontend PWM and the backend phase-shifted-carrier scheme.
//!
//! Carriers are evaluated analytically from the sample time (piecewise-linear
//! triangle in `[0, 1]`), never sampled-and-held. Interleaved carriers cross
//! a constant reference in coincident rising/falling pairs; the comparator
//! resolves those ties on the falling side within a rounding-width band, so
//! the inserted count is conserved sample by sample even when the pair's
//! evaluations disagree by a few ulp.

/// One analytic evaluation of a triangle carrier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarrierSample {
    /// Carrier value in `[0, 1]`.
    pub value: f64,
    /// True on the falling segment (apex side, half-open `[apex, valley)`).
    pub falling: bool,
}

/// Evaluates a unipolar triangle carrier at time `t`.
///
/// `phase` is the carrier offset as a fraction of one period in `[0, 1)`;
/// the backend assigns `(k-1)/N` to module `k` for a uniform interleave. The
/// valley (0) sits at fraction 0, the apex (1) at fraction one half. The
/// doubling and the apex-side subtraction are exact in binary floating
/// point, which keeps interleaved carriers consistent at shared crossings.
pub fn unipolar_triangle(t: f64, freq: f64, phase: f64) -> CarrierSample {
    let base = (freq * t).rem_euclid(1.0);
    let mut frac = base + phase;
    if frac >= 1.0 {
        frac -= 1.0;
    }
    if frac < 0.5 {
        CarrierSample {
            value: 2.0 * frac,
            falling: false,
        }
    } else {
        CarrierSample {
            value: 2.0 - 2.0 * frac,
            falling: true,
        }
    }
}

/// Ties between a duty and a carrier are resolved inside this band. It is
/// orders of magnitude above the carrier evaluation error (a few ulp) and
/// orders of magnitude below one solver-step of carrier travel.
const TIE_BAND: f64 = 1e-12;

/// Comparator shared by the frontend legs and the backend modules.
///
/// On-state is `duty >= carrier`, except that a tie (within a 1e-12 band)
/// counts as on only while the carrier falls. Duties of exactly 0 and 1 pin
/// their rail unconditionally. The falling-side tie hands one module over to
/// another atomically when a rising and a falling carrier cross the
/// reference at the same instant (constant `m_dc = j/N`), so the inserted
/// count never glitches at exact levels.
pub fn duty_on(duty: f64, carrier: CarrierSample) -> bool {
    if duty <= 0.0 {
        return false;
    }
    if duty >= 1.0 {
        return true;
    }
    let margin = duty - carrier.value;
    if margin > TIE_BAND {
        true
    } else if margin < -TIE_BAND {
        false
    } else {
        carrier.falling
    }
}

//! Loss models, harmonic analysis and the comparative figures of merit.
//!
//! Device losses use analytic datasheet-style models instead of transistor
//! physics: conduction is a knee voltage plus on-resistance, switching energy
//! scales linearly in blocked voltage and commutated current about a
//! datasheet reference point. THD is computed by discrete Fourier analysis at
//! exact harmonic bins over an integer number of fundamental periods, so no
//! window correction is needed.

use crate::pwm::{DeviceClass, SwitchEdge, SwitchEvent};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error(
        "window of {samples} samples at dt={dt:.3e}s is not an integer number of {f0} Hz periods"
    )]
    WindowMismatch { samples: usize, dt: f64, f0: f64 },
    #[error("harmonic {harmonic} at {f0} Hz exceeds the Nyquist rate of the {dt:.3e}s trace")]
    NyquistExceeded { harmonic: usize, f0: f64, dt: f64 },
    #[error("window of {window:.6}s does not cover an integer number of {f0} Hz periods")]
    NonIntegerWindow { window: f64, f0: f64 },
    #[error("no switch conducts; switch stress is zero")]
    ZeroStress,
}

/// Datasheet-style loss parameters for one device class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeviceLossParams {
    pub class: DeviceClass,
    /// Knee voltage in volts (zero for FETs).
    pub v_on0: f64,
    /// On-resistance (or slope resistance) in ohms.
    pub r_on: f64,
    /// Turn-on energy in joules at the reference point.
    pub e_on: f64,
    /// Turn-off energy in joules at the reference point.
    pub e_off: f64,
    /// Companion-diode recovery energy in joules, dissipated per turn-on
    /// (IGBT legs only; zero for FETs).
    pub e_rr: f64,
    /// Reference blocking voltage in volts.
    pub v_ref: f64,
    /// Reference commutated current in amperes.
    pub i_ref: f64,
}

impl DeviceLossParams {
    /// Reference parameters for a 1200 V / 300 A class IGBT half-bridge
    /// (knee 0.9 V, 4.5 mOhm slope, 25/27 mJ switching plus 19 mJ recovery at
    /// 600 V / 300 A).
    pub fn reference_igbt() -> Self {
        Self {
            class: DeviceClass::Igbt,
            v_on0: 0.9,
            r_on: 4.5e-3,
            e_on: 25e-3,
            e_off: 27e-3,
            e_rr: 19e-3,
            v_ref: 600.0,
            i_ref: 300.0,
        }
    }

    /// Reference parameters for a 60 V / 300 A class FET
    /// (0.75 mOhm, 60/90 uJ switching at 30 V / 300 A).
    pub fn reference_fet() -> Self {
        Self {
            class: DeviceClass::Fet,
            v_on0: 0.0,
            r_on: 0.75e-3,
            e_on: 60e-6,
            e_off: 90e-6,
            e_rr: 0.0,
            v_ref: 30.0,
            i_ref: 300.0,
        }
    }
}

/// Conduction loss `v_on0 * i_avg + r_on * i_rms^2` in watts.
///
/// `i_avg` and `i_rms` are window-normalized statistics of the conducted
/// current (zero while the device blocks), so the result is already a
/// window-average power.
pub fn conduction_loss(device: &DeviceLossParams, i_avg: f64, i_rms: f64) -> f64 {
    device.v_on0 * i_avg + device.r_on * i_rms * i_rms
}

/// Switching loss in watts from the events of `device.class` inside
/// `[t_start, t_start + window)`.
///
/// Per-event energy is the reference energy scaled by
/// `(v_blocked / v_ref) * (i / i_ref)`; turn-on events additionally dissipate
/// the companion diode's recovery energy at the same scaling. The window must
/// cover an integer number of fundamental periods.
pub fn switching_loss(
    events: &[SwitchEvent],
    device: &DeviceLossParams,
    t_start: f64,
    window: f64,
    fundamental: f64,
) -> Result<f64, MetricsError> {
    let periods = window * fundamental;
    if (periods - periods.round()).abs() > 1e-6 || periods.round() < 1.0 {
        return Err(MetricsError::NonIntegerWindow {
            window,
            f0: fundamental,
        });
    }
    let t_end = t_start + window;
    let mut energy = 0.0;
    for e in events {
        if e.class != device.class || e.t < t_start || e.t >= t_end {
            continue;
        }
        let scale = (e.v_blocked / device.v_ref) * (e.i_conducted / device.i_ref);
        energy += match e.edge {
            SwitchEdge::TurnOn => (device.e_on + device.e_rr) * scale,
            SwitchEdge::TurnOff => device.e_off * scale,
        };
    }
    Ok(energy / window)
}

/// Complex DFT coefficient of `samples` at harmonic `h` of `f0`, normalized
/// so a pure cosine (sine) of amplitude 1 yields `|X_h| = 1`.
///
/// Valid when the samples span an integer number of fundamental periods.
pub fn harmonic_coeff(samples: &[f64], dt: f64, f0: f64, h: usize) -> (f64, f64) {
    let w = std::f64::consts::TAU * f0 * h as f64 * dt;
    // Rotation recurrence instead of per-sample trig; the accumulated phase
    // error over ~1e6 samples is far below the metric tolerances.
    let (step_cos, step_sin) = (w.cos(), w.sin());
    let (mut c, mut s) = (1.0f64, 0.0f64);
    let (mut acc_re, mut acc_im) = (0.0f64, 0.0f64);
    for &x in samples {
        acc_re += x * c;
        acc_im -= x * s;
        let cn = c * step_cos - s * step_sin;
        s = c * step_sin + s * step_cos;
        c = cn;
    }
    let n = samples.len() as f64;
    if h == 0 {
        (acc_re / n, 0.0)
    } else {
        (2.0 * acc_re / n, 2.0 * acc_im / n)
    }
}

fn window_periods(samples: usize, dt: f64, f0: f64) -> Result<(), MetricsError> {
    let periods = samples as f64 * dt * f0;
    // Integer to within half a sample step.
    if (periods - periods.round()).abs() > 0.5 * dt * f0 + 1e-9 || periods.round() < 1.0 {
        return Err(MetricsError::WindowMismatch { samples, dt, f0 });
    }
    Ok(())
}

/// Total harmonic distortion `sqrt(sum_{h=2..H} |X_h|^2) / |X_1|` of a
/// uniformly sampled waveform.
///
/// The window must be an integer number of `1/f0` periods and `H * f0` must
/// stay below the Nyquist rate.
pub fn thd(samples: &[f64], dt: f64, f0: f64, h_max: usize) -> Result<f64, MetricsError> {
    window_periods(samples.len(), dt, f0)?;
    if h_max as f64 * f0 >= 0.5 / dt {
        return Err(MetricsError::NyquistExceeded {
            harmonic: h_max,
            f0,
            dt,
        });
    }
    let (re1, im1) = harmonic_coeff(samples, dt, f0, 1);
    let fund = (re1 * re1 + im1 * im1).sqrt();
    let mut sum_sq = 0.0;
    for h in 2..=h_max {
        let (re, im) = harmonic_coeff(samples, dt, f0, h);
        sum_sq += re * re + im * im;
    }
    Ok(sum_sq.sqrt() / fund)
}

/// Harmonic magnitude `|X_h|` (amplitude of the `h`-th harmonic).
pub fn harmonic_magnitude(samples: &[f64], dt: f64, f0: f64, h: usize) -> f64 {
    let (re, im) = harmonic_coeff(samples, dt, f0, h);
    (re * re + im * im).sqrt()
}

/// Broadband THD: every component above the fundamental, via Parseval on the
/// residual after removing dc and the fundamental.
///
/// Equals [`thd`] with `H` extended to the full resolved band whenever the
/// waveform is periodic in `1/f0` over the window (carrier frequencies that
/// are integer multiples of `f0` guarantee this), and correctly counts
/// interharmonic content when it is not. This is the variant used for trace
/// reports, where the distortion lives in the switching bands far above any
/// small fixed harmonic count.
pub fn thd_broadband(samples: &[f64], dt: f64, f0: f64) -> Result<f64, MetricsError> {
    window_periods(samples.len(), dt, f0)?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (re1, im1) = harmonic_coeff(samples, dt, f0, 1);
    let fund_sq = (re1 * re1 + im1 * im1) / 2.0;
    if fund_sq <= 0.0 {
        return Ok(0.0);
    }
    // Residual power after removing dc and the reconstructed fundamental.
    let w = std::f64::consts::TAU * f0 * dt;
    let (step_cos, step_sin) = (w.cos(), w.sin());
    let (mut c, mut s) = (1.0f64, 0.0f64);
    let mut resid_sq = 0.0;
    for &x in samples {
        let fund = re1 * c - im1 * s;
        let r = x - mean - fund;
        resid_sq += r * r;
        let cn = c * step_cos - s * step_sin;
        s = c * step_sin + s * step_cos;
        c = cn;
    }
    Ok((resid_sq / n / fund_sq).sqrt())
}

/// Low-band reconstruction of `samples`: dc plus every harmonic of `f0` up to
/// `band_hz`. Used to strip the fundamental-tracking content of `v_dc2`
/// before measuring switching ripple.
pub fn band_reconstruction(samples: &[f64], dt: f64, f0: f64, band_hz: f64) -> Vec<f64> {
    let h_max = (band_hz / f0).floor() as usize;
    let mut coeffs = Vec::with_capacity(h_max + 1);
    for h in 0..=h_max {
        coeffs.push(harmonic_coeff(samples, dt, f0, h));
    }
    let mut out = vec![0.0; samples.len()];
    for (h, (re, im)) in coeffs.iter().enumerate() {
        if h == 0 {
            for y in out.iter_mut() {
                *y += re;
            }
            continue;
        }
        let w = std::f64::consts::TAU * f0 * h as f64 * dt;
        let (step_cos, step_sin) = (w.cos(), w.sin());
        let (mut c, mut s) = (1.0f64, 0.0f64);
        for y in out.iter_mut() {
            // X_h = re + j*im with x(t) ~ re*cos(w t) - im*sin(w t).
            *y += re * c - im * s;
            let cn = c * step_cos - s * step_sin;
            s = c * step_sin + s * step_cos;
            c = cn;
        }
    }
    out
}

/// Switching ripple of a dc-link waveform: strip the band up to `band_hz`
/// (harmonics of `f0`, or just the mean when `f0` is `None`) and return the
/// zero-to-peak deviation of the residual, i.e. half its peak-to-peak
/// excursion. This matches the analytic formula's convention (see
/// [`ripple_analytic`]).
pub fn switching_ripple(samples: &[f64], dt: f64, f0: Option<f64>, band_hz: f64) -> f64 {
    let residual_pp = match f0 {
        Some(f0) => {
            let fit = band_reconstruction(samples, dt, f0, band_hz);
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (x, y) in samples.iter().zip(&fit) {
                let r = x - y;
                lo = lo.min(r);
                hi = hi.max(r);
            }
            hi - lo
        }
        None => {
            let mean = samples.iter().sum::<f64>() / samples.len() as f64;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &x in samples {
                lo = lo.min(x - mean);
                hi = hi.max(x - mean);
            }
            hi - lo
        }
    };
    residual_pp / 2.0
}

/// Step-down backend whose output ripple is being estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendTopology {
    /// Cascaded half-bridge string with phase-shifted carriers.
    Chb,
    /// Single buck stage from the full string voltage.
    Buck,
}

/// Analytic zero-to-peak voltage ripple of `v_dc2` for a step-down backend
/// into the L-C filter:
///
/// ```text
/// CHB:  V_mdl (ceil(m N) - m N)(m N - floor(m N)) / (16 L C f_s^2 N^2)
/// buck: N V_mdl (1 - m) m / (16 L C f_s^2)
/// ```
///
/// `f_s` is the per-module carrier frequency for the CHB (effective string
/// frequency `N f_s`) and the switch frequency for the buck; comparisons
/// match the effective frequencies by passing `f_s(buck) = N * f_s(CHB)`.
/// The CHB ripple vanishes at integer `m N` (exact levels).
pub fn ripple_analytic(
    topology: BackendTopology,
    v_mdl: f64,
    n_mdl: usize,
    m_dc: f64,
    l: f64,
    c: f64,
    f_s: f64,
) -> f64 {
    debug_assert!((0.0..=1.0).contains(&m_dc));
    let n = n_mdl as f64;
    match topology {
        BackendTopology::Chb => {
            let mn = m_dc * n;
            v_mdl * (mn.ceil() - mn) * (mn - mn.floor()) / (16.0 * l * c * f_s * f_s * n * n)
        }
        BackendTopology::Buck => n * v_mdl * (1.0 - m_dc) * m_dc / (16.0 * l * c * f_s * f_s),
    }
}

/// Switch utilization ratio `SUR = P_load / sum(V_j * I_j)` for a set of
/// switch stresses `(rated blocking voltage, rms conducted current)`.
pub fn sur(p_load: f64, stresses: &[(f64, f64)]) -> Result<f64, MetricsError> {
    let s: f64 = stresses.iter().map(|(v, i)| v * i).sum();
    if s <= 0.0 {
        return Err(MetricsError::ZeroStress);
    }
    Ok(p_load / s)
}

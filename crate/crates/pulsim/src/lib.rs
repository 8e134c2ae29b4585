//! Desk-scale simulator for a pulsating dc-link motor drive whose modulation
//! is shared between a reconfigurable battery backend and a two-level
//! inverter frontend.
//!
//! The backend is a string of battery modules behind half-bridges; a
//! phase-shifted-carrier scheme inserts or bypasses modules so the dc link
//! tracks the envelope `max{v_a,v_b,v_c} - min{v_a,v_b,v_c}` of the phase
//! references. The frontend then only commutates: one leg modulates at a
//! time, the other two rest on their rails. The crate simulates the switched
//! circuit through the dc-link L-C filter into a three-phase load and
//! post-processes traces into comparative metrics (losses by device class
//! and mechanism, switching counts, THD, dc-link ripple, switch utilization)
//! against SVPWM and DPWM baselines on a fixed dc link.
//!
//! Entry points:
//! - [`scenario::parse_scenario`] reads a sectioned key-value document into a
//!   validated [`scenario::Scenario`].
//! - [`sim::simulate`] runs it into a [`sim::SimTrace`].
//! - [`report::compute_report`] turns a trace into a [`report::MetricsReport`].
//! - [`sweep`] runs matched-current strategy comparisons and parameter grids.
//!
//! ```
//! use pulsim::circuit::{filter_frequency_response, FilterParams};
//!
//! let mut filt = FilterParams::new(30e-6, 60e-6);
//! filt.r_eq = 3.0;
//! let resp = filter_frequency_response(&filt, 1e3);
//! assert!((resp.gain - 1.074).abs() < 1e-3);
//! assert!((resp.phase_deg + 3.87).abs() < 0.01);
//! ```

pub mod artifacts;
pub mod backend;
pub mod carrier;
pub mod circuit;
pub mod metrics;
pub mod pwm;
pub mod reference;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod sweep;

mod book;

pub use report::{compute_report, MetricsReport};
pub use scenario::{parse_scenario, Scenario, Strategy};
pub use sim::{simulate, SimTrace};

//! Matched-current strategy comparisons and cartesian parameter sweeps.
//!
//! A comparison fixes the peak output current and runs the three strategies
//! (proposed backend, SVPWM, DPWM on the fixed link) at each requested
//! modulation index and power factor; the load impedance is synthesized per
//! point so the cases stay current-matched. Sweeps apply `section.key`
//! overrides to a base document and run every grid point through the normal
//! parse/validate/simulate path; per-point failures land in the row's error
//! column instead of aborting the grid.

use crate::report::{compute_report, MetricsReport};
use crate::scenario::{
    parse_number, scenario_from_document, ConfigError, Document, Scenario, Strategy,
};
use crate::sim::simulate;
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("comparison requires `[compare] i_pk` in the base scenario")]
    MissingComparePeak,
    #[error("comparison requires a proposed-strategy base scenario with a [backend] section")]
    MissingBackend,
    #[error("sweep grid has {points} points, above the cap of {cap}")]
    GridTooLarge { points: usize, cap: usize },
    #[error("sweep file: {0}")]
    Spec(String),
}

/// One metrics table row; failed points keep their identity columns and an
/// error message.
#[derive(Clone, Debug)]
pub struct MetricsRow {
    pub strategy: String,
    pub m: f64,
    pub pf: f64,
    pub report: Option<MetricsReport>,
    pub error: String,
}

impl MetricsRow {
    fn failed(strategy: &str, m: f64, pf: f64, error: String) -> Self {
        Self {
            strategy: strategy.to_string(),
            m,
            pf,
            report: None,
            error,
        }
    }
}

/// Synthesizes the series R-L load that draws `i_pk` at modulation index `m`
/// and displacement factor `pf` on a bus of `vdc` volts.
pub fn matched_load(vdc: f64, f: f64, m: f64, pf: f64, i_pk: f64) -> (f64, f64) {
    let amplitude = m * vdc / 3.0f64.sqrt();
    let z = amplitude / i_pk;
    let r = z * pf;
    let x = z * (1.0 - pf * pf).max(0.0).sqrt();
    (r, x / (TAU * f))
}

fn run_one(scenario: &Scenario) -> Result<MetricsReport, String> {
    let trace = simulate(scenario).map_err(|e| e.to_string())?;
    compute_report(&trace, scenario).map_err(|e| e.to_string())
}

/// Runs the three-strategy comparison at every `(m, pf)` grid point.
///
/// Row order is deterministic: modulation index, then power factor, then
/// strategy (proposed, svpwm, dpwm). Per-case failures are recorded in the
/// row without aborting the remaining rows.
pub fn run_comparison(
    base: &Scenario,
    m_list: &[f64],
    pf_list: &[f64],
) -> Result<Vec<MetricsRow>, SweepError> {
    let i_pk = base.compare.ok_or(SweepError::MissingComparePeak)?.i_pk;
    if base.backend.is_none() {
        return Err(SweepError::MissingBackend);
    }
    let vdc = {
        let b = base.backend.as_ref().unwrap();
        b.n_mdl as f64 * b.v_mdl
    };
    let mut rows = Vec::with_capacity(m_list.len() * pf_list.len() * 3);
    for &m in m_list {
        for &pf in pf_list {
            let (r, l) = matched_load(vdc, base.reference.f, m, pf, i_pk);
            for strategy in [Strategy::Proposed, Strategy::Svpwm, Strategy::Dpwm] {
                let mut case = base.clone();
                case.strategy = strategy;
                case.reference.m = m;
                case.load = crate::circuit::LoadSpec::series_rl(r, l);
                if strategy != Strategy::Proposed {
                    case.vdc_fixed = Some(vdc);
                    case.backend = None;
                }
                let row = match run_one(&case) {
                    Ok(mut report) => {
                        // The requested operating point labels the row.
                        report.pf = pf;
                        MetricsRow {
                            strategy: strategy.label().to_string(),
                            m,
                            pf,
                            report: Some(report),
                            error: String::new(),
                        }
                    }
                    Err(e) => MetricsRow::failed(strategy.label(), m, pf, e),
                };
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

/// A parsed sweep specification: base scenario path plus override axes.
#[derive(Clone, Debug)]
pub struct SweepSpec {
    /// Path of the base scenario document, relative to the sweep file.
    pub scenario_path: String,
    /// `(section.key, values)` in document order; the last axis varies
    /// fastest.
    pub axes: Vec<(String, Vec<String>)>,
    pub points_cap: usize,
}

impl SweepSpec {
    /// Parses a sweep document:
    ///
    /// ```text
    /// [sweep]
    /// scenario = base.ini
    /// points_cap = 10000        # optional
    ///
    /// [axes]
    /// reference.m = 0.3, 0.5, 0.7
    /// strategy.kind = proposed, svpwm
    /// ```
    pub fn parse(text: &str) -> Result<Self, SweepError> {
        let mut scenario_path = None;
        let mut points_cap = 10_000usize;
        let mut axes = Vec::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') || t.starts_with(';') {
                continue;
            }
            if let Some(name) = t.strip_prefix('[') {
                section = name
                    .strip_suffix(']')
                    .ok_or_else(|| SweepError::Spec(format!("line {line}: bad section header")))?
                    .trim()
                    .to_string();
                continue;
            }
            let (key, value) = t
                .split_once('=')
                .ok_or_else(|| SweepError::Spec(format!("line {line}: expected key = value")))?;
            let key = key.trim();
            let value = value.split(['#', ';']).next().unwrap_or("").trim();
            match section.as_str() {
                "sweep" => match key {
                    "scenario" => scenario_path = Some(value.to_string()),
                    "points_cap" => {
                        points_cap = parse_number(value)
                            .map_err(|e| SweepError::Spec(format!("line {line}: {e}")))?
                            as usize
                    }
                    other => {
                        return Err(SweepError::Spec(format!(
                            "line {line}: unknown key sweep.{other}"
                        )))
                    }
                },
                "axes" => {
                    let values: Vec<String> =
                        value.split(',').map(|v| v.trim().to_string()).collect();
                    if values.is_empty() || values.iter().any(|v| v.is_empty()) {
                        return Err(SweepError::Spec(format!("line {line}: empty axis value")));
                    }
                    axes.push((key.to_string(), values));
                }
                other => {
                    return Err(SweepError::Spec(format!(
                        "line {line}: unknown section [{other}]"
                    )))
                }
            }
        }
        Ok(Self {
            scenario_path: scenario_path
                .ok_or_else(|| SweepError::Spec("missing sweep.scenario".to_string()))?,
            axes,
            points_cap,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.axes
            .iter()
            .map(|(_, v)| v.len())
            .product::<usize>()
            .max(1)
    }
}

/// Runs a sweep over the base document text. Points execute in parallel up
/// to `jobs` threads; row order follows the axis grid regardless of
/// completion order (last axis fastest).
pub fn run_sweep(
    base_text: &str,
    spec: &SweepSpec,
    jobs: usize,
) -> Result<Vec<MetricsRow>, SweepError> {
    let points = spec.grid_size();
    if points > spec.points_cap {
        return Err(SweepError::GridTooLarge {
            points,
            cap: spec.points_cap,
        });
    }
    let base = Document::parse(base_text)?;
    let assignments: Vec<Vec<(String, String)>> = (0..points)
        .map(|mut idx| {
            let mut sets = Vec::with_capacity(spec.axes.len());
            for (path, values) in spec.axes.iter().rev() {
                let v = &values[idx % values.len()];
                idx /= values.len();
                sets.push((path.clone(), v.clone()));
            }
            sets.reverse();
            sets
        })
        .collect();

    let run_point = |sets: &Vec<(String, String)>| -> MetricsRow {
        let mut doc = base.clone();
        for (path, value) in sets {
            if let Err(e) = doc.set(path, value) {
                return MetricsRow::failed("", f64::NAN, f64::NAN, e.to_string());
            }
        }
        match scenario_from_document(&doc) {
            Ok(scenario) => match run_one(&scenario) {
                Ok(report) => MetricsRow {
                    strategy: scenario.strategy.label().to_string(),
                    m: scenario.reference.m,
                    pf: report.pf,
                    report: Some(report),
                    error: String::new(),
                },
                Err(e) => {
                    MetricsRow::failed(scenario.strategy.label(), scenario.reference.m, f64::NAN, e)
                }
            },
            Err(e) => MetricsRow::failed("", f64::NAN, f64::NAN, e.to_string()),
        }
    };

    if jobs <= 1 {
        Ok(assignments.iter().map(run_point).collect())
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| SweepError::Spec(e.to_string()))?;
        Ok(pool.install(|| assignments.par_iter().map(run_point).collect()))
    }
}

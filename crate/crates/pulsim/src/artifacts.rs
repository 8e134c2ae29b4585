//! Flat-file emission of traces and metrics tables.
//!
//! Numeric text uses Rust's shortest round-trip decimal formatting, so
//! re-emitting the same inputs produces byte-identical files. Trace files use
//! UNIX newlines, UTF-8 and a mandatory header row.

use crate::sim::SimTrace;
use crate::sweep::MetricsRow;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Fixed metrics column order.
pub const METRICS_HEADER: &str = "strategy,m,pf,p_out_w,cond_igbt_w,sw_igbt_w,cond_fet_w,sw_fet_w,total_loss_w,thd_ia,ripple_pp_v,sur,commutations_frontend,commutations_backend,error";

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

/// Renders the metrics table.
pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::with_capacity(128 * (rows.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for row in rows {
        match &row.report {
            Some(r) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    row.strategy,
                    num(row.m),
                    num(row.pf),
                    num(r.p_out_w),
                    num(r.cond_igbt_w),
                    num(r.sw_igbt_w),
                    num(r.cond_fet_w),
                    num(r.sw_fet_w),
                    num(r.total_loss_w()),
                    num(r.thd[0]),
                    num(r.ripple_v),
                    num(r.sur),
                    num(r.commutations_frontend),
                    num(r.commutations_backend),
                    row.error,
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "{},{},{},,,,,,,,,,,,{}",
                    row.strategy,
                    num(row.m),
                    num(row.pf),
                    row.error.replace(['\n', ','], ";"),
                );
            }
        }
    }
    out
}

/// Renders the trace table, keeping every `every`-th sample (1 = all).
///
/// Columns: `t, v_dc1, v_dc2, i_L, i_a, i_b, i_c, n_series, gate_a, gate_b,
/// gate_c, i_mdl_1..N`.
pub fn trace_csv(trace: &SimTrace, every: usize) -> String {
    let every = every.max(1);
    let mut out = String::new();
    out.push_str("t,v_dc1,v_dc2,i_L,i_a,i_b,i_c,n_series,gate_a,gate_b,gate_c");
    for k in 1..=trace.n_mdl {
        let _ = write!(out, ",i_mdl_{k}");
    }
    out.push('\n');
    for k in (0..trace.len()).step_by(every) {
        let mask = trace.series_mask[k];
        let gates = trace.gates[k];
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            num(trace.time(k)),
            num(trace.v_dc1[k]),
            num(trace.v_dc2[k]),
            num(trace.i_l[k]),
            num(trace.i_a[k]),
            num(trace.i_b[k]),
            num(trace.i_c[k]),
            mask.count_ones(),
            gates & 1,
            (gates >> 1) & 1,
            (gates >> 2) & 1,
        );
        for module in 0..trace.n_mdl {
            let i = if mask & (1 << module) != 0 {
                trace.i_l[k]
            } else {
                0.0
            };
            let _ = write!(out, ",{}", num(i));
        }
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, content: &str) -> Result<(), ArtifactError> {
    std::fs::write(path, content).map_err(|source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `trace.csv` (optional) and `metrics.csv` into `dir`, returning the
/// created paths.
pub fn emit_artifacts(
    dir: &Path,
    trace: Option<(&SimTrace, usize)>,
    rows: &[MetricsRow],
) -> Result<Vec<PathBuf>, ArtifactError> {
    std::fs::create_dir_all(dir).map_err(|source| ArtifactError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    if let Some((trace, every)) = trace {
        let path = dir.join("trace.csv");
        write_file(&path, &trace_csv(trace, every))?;
        written.push(path);
    }
    let path = dir.join("metrics.csv");
    write_file(&path, &metrics_csv(rows))?;
    written.push(path);
    Ok(written)
}

//! End-to-end checks of the `sim` binary: artifact schema, determinism,
//! exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

fn sim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sim"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pulsim-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn run_emits_deterministic_artifacts() {
    let dir = tmp_dir("run");
    let scenario = configs().join("bench_8mod.ini");
    let run = |out: &Path| {
        let output = sim()
            .args([
                "run",
                scenario.to_str().unwrap(),
                "--set",
                "timing.settle=20m",
                "--set",
                "timing.duration=60m",
                "--out",
                out.to_str().unwrap(),
                "--trace-every",
                "1000",
            ])
            .output()
            .unwrap();
        assert!(
            output.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        output.stdout
    };
    let out1 = dir.join("a");
    let out2 = dir.join("b");
    let stdout1 = run(&out1);
    let stdout2 = run(&out2);
    assert_eq!(stdout1, stdout2, "stdout must be byte-identical");
    for file in ["trace.csv", "metrics.csv"] {
        let a = std::fs::read(out1.join(file)).unwrap();
        let b = std::fs::read(out2.join(file)).unwrap();
        assert_eq!(a, b, "{file} must be byte-identical across runs");
    }
    let metrics = std::fs::read_to_string(out1.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("strategy,m,pf,p_out_w,"));
    let trace = std::fs::read_to_string(out1.join("trace.csv")).unwrap();
    let header = trace.lines().next().unwrap();
    assert_eq!(
        header,
        "t,v_dc1,v_dc2,i_L,i_a,i_b,i_c,n_series,gate_a,gate_b,gate_c,\
         i_mdl_1,i_mdl_2,i_mdl_3,i_mdl_4,i_mdl_5,i_mdl_6,i_mdl_7,i_mdl_8"
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn validation_errors_exit_2() {
    let dir = tmp_dir("bad");
    let bad = dir.join("bad.ini");
    std::fs::write(&bad, "[strategy]\nkind = proposed\n").unwrap();
    let output = sim().args(["run", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("reference.m"), "stderr: {stderr}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_file_exits_4() {
    let output = sim().args(["run", "/nonexistent/x.ini"]).output().unwrap();
    assert_eq!(output.status.code(), Some(4));
}

#[test]
fn numerical_blowup_exits_3() {
    // A picohenry dc-link inductor is far beyond what the automatic step can
    // resolve; the solver must detect the runaway state and report it.
    let scenario = configs().join("bench_8mod.ini");
    let output = sim()
        .args([
            "run",
            scenario.to_str().unwrap(),
            "--set",
            "filter.l=1e-12",
            "--set",
            "backend.f_mdl=50",
        ])
        .output()
        .unwrap();
    assert_eq!(
        output.status.code(),
        Some(3),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("blew up"), "stderr: {stderr}");
}

#[test]
fn freq_response_prints_table() {
    let output = sim()
        .args([
            "freq-response",
            "--L",
            "30u",
            "--C",
            "60u",
            "--Req",
            "3",
            "--f",
            "1k,2k",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("f_hz,gain,phase_deg"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "1000");
    let gain: f64 = row[1].parse().unwrap();
    assert!((gain - 1.074).abs() < 1e-3, "gain {gain}");
}

#[test]
fn compare_emits_three_rows_per_point() {
    let scenario = configs().join("fullscale_16mod.ini");
    let output = sim()
        .args([
            "compare",
            scenario.to_str().unwrap(),
            "--m",
            "0.9",
            "--pf",
            "0.9",
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8(output.stdout).unwrap();
    let rows: Vec<&str> = stdout.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("proposed,0.9,0.9,"));
    assert!(rows[1].starts_with("svpwm,0.9,0.9,"));
    assert!(rows[2].starts_with("dpwm,0.9,0.9,"));
}

#[test]
fn sweep_runs_from_file() {
    let dir = tmp_dir("sweep");
    let base = configs().join("thd_sweep_base.ini");
    std::fs::copy(&base, dir.join("base.ini")).unwrap();
    std::fs::write(
        dir.join("sweep.ini"),
        "[sweep]\nscenario = base.ini\n[axes]\nreference.m = 0.5, 0.9\nstrategy.kind = proposed, svpwm\n",
    )
    .unwrap();
    let output = sim()
        .args([
            "sweep",
            dir.join("sweep.ini").to_str().unwrap(),
            "--jobs",
            "2",
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8(output.stdout).unwrap();
    let rows: Vec<&str> = stdout.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    // Deterministic order: first axis (m) outer, second (strategy) inner.
    assert!(rows[0].starts_with("proposed,0.5,"));
    assert!(rows[1].starts_with("svpwm,0.5,"));
    assert!(rows[2].starts_with("proposed,0.9,"));
    assert!(rows[3].starts_with("svpwm,0.9,"));
    std::fs::remove_dir_all(&dir).ok();
}

//! `sim`: scenario runner, three-case comparison, parameter sweeps and
//! filter frequency response, emitting deterministic CSV artifacts.
//!
//! Exit codes: 0 success, 2 validation error, 3 simulation error, 4 io error.

use clap::{Args, Parser, Subcommand};
use pulsim::artifacts::{emit_artifacts, metrics_csv};
use pulsim::scenario::{parse_number, scenario_from_document, ConfigError, Document};
use pulsim::sweep::{run_comparison, run_sweep, MetricsRow, SweepError, SweepSpec};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sim", version, about = "Pulsating dc-link drive simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and emit its trace and metrics.
    Run(RunArgs),
    /// Run the three-strategy comparison at matched output current.
    Compare(CompareArgs),
    /// Run a cartesian parameter sweep from a sweep file.
    Sweep(SweepArgs),
    /// Evaluate the dc-link filter's small-signal frequency response.
    FreqResponse(FreqArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario document path.
    scenario: PathBuf,
    /// Override `section.key=value`; may be repeated.
    #[arg(long = "set", value_name = "K=V")]
    set: Vec<String>,
    /// Output directory for trace.csv and metrics.csv.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Keep every N-th trace sample when writing trace.csv.
    #[arg(long, value_name = "N", default_value_t = 1)]
    trace_every: usize,
}

#[derive(Args)]
struct CompareArgs {
    /// Base scenario (proposed strategy with a [backend] section and
    /// `[compare] i_pk`).
    scenario: PathBuf,
    /// Modulation indices, comma separated.
    #[arg(long, value_name = "LIST", required = true)]
    m: String,
    /// Power factors, comma separated.
    #[arg(long, value_name = "LIST", required = true)]
    pf: String,
    /// Output directory for metrics.csv.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep specification file.
    sweep: PathBuf,
    /// Parallel jobs (default: available cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Output directory for metrics.csv.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FreqArgs {
    /// Filter inductance in henries (suffixes u/m/k accepted).
    #[arg(long = "L", value_name = "HENRY")]
    l: String,
    /// Filter capacitance in farads.
    #[arg(long = "C", value_name = "FARAD")]
    c: String,
    /// Equivalent load resistance in ohms.
    #[arg(long = "Req", value_name = "OHM")]
    req: String,
    /// Frequencies in Hz, comma separated.
    #[arg(long = "f", value_name = "LIST")]
    f: String,
}

enum CliError {
    Validation(String),
    Simulation(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Validation(_) => 2,
            CliError::Simulation(_) => 3,
            CliError::Io(_) => 4,
        })
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Simulation(m) | CliError::Io(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<pulsim::artifacts::ArtifactError> for CliError {
    fn from(e: pulsim::artifacts::ArtifactError) -> Self {
        CliError::Io(e.to_string())
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|v| parse_number(v).map_err(CliError::Validation))
        .collect()
}

fn run(args: &RunArgs) -> Result<(), CliError> {
    let text = read_file(&args.scenario)?;
    let mut doc = Document::parse(&text)?;
    for s in &args.set {
        let (path, value) = s.split_once('=').ok_or_else(|| {
            CliError::Validation(format!("--set `{s}` must be section.key=value"))
        })?;
        doc.set(path.trim(), value.trim())?;
    }
    let scenario = scenario_from_document(&doc)?;
    let trace = pulsim::simulate(&scenario).map_err(|e| CliError::Simulation(e.to_string()))?;
    let report = pulsim::compute_report(&trace, &scenario)
        .map_err(|e| CliError::Simulation(e.to_string()))?;
    let row = MetricsRow {
        strategy: scenario.strategy.label().to_string(),
        m: scenario.reference.m,
        pf: report.pf,
        report: Some(report),
        error: String::new(),
    };
    let rows = [row];
    if let Some(dir) = &args.out {
        let written = emit_artifacts(dir, Some((&trace, args.trace_every)), &rows)?;
        for path in written {
            eprintln!("wrote {}", path.display());
        }
    }
    print!("{}", metrics_csv(&rows));
    Ok(())
}

fn emit_rows(rows: &[MetricsRow], out: &Option<PathBuf>) -> Result<(), CliError> {
    if let Some(dir) = out {
        let written = emit_artifacts(dir, None, rows)?;
        for path in written {
            eprintln!("wrote {}", path.display());
        }
    }
    print!("{}", metrics_csv(rows));
    Ok(())
}

fn compare(args: &CompareArgs) -> Result<(), CliError> {
    let text = read_file(&args.scenario)?;
    let base = pulsim::parse_scenario(&text)?;
    let m = parse_list(&args.m)?;
    let pf = parse_list(&args.pf)?;
    let rows = run_comparison(&base, &m, &pf)?;
    emit_rows(&rows, &args.out)
}

fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let text = read_file(&args.sweep)?;
    let spec = SweepSpec::parse(&text)?;
    let base_path = args
        .sweep
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&spec.scenario_path);
    let base_text = read_file(&base_path)?;
    let jobs = args.jobs.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    let rows = run_sweep(&base_text, &spec, jobs)?;
    emit_rows(&rows, &args.out)
}

fn freq_response(args: &FreqArgs) -> Result<(), CliError> {
    let l = parse_number(&args.l).map_err(CliError::Validation)?;
    let c = parse_number(&args.c).map_err(CliError::Validation)?;
    let req = parse_number(&args.req).map_err(CliError::Validation)?;
    if l <= 0.0 || c <= 0.0 {
        return Err(CliError::Validation("L and C must be positive".to_string()));
    }
    let freqs = parse_list(&args.f)?;
    let filt = pulsim::circuit::FilterParams {
        l,
        c,
        r_l: 0.0,
        r_eq: req,
    };
    println!("f_hz,gain,phase_deg");
    for f in freqs {
        if f <= 0.0 {
            return Err(CliError::Validation(format!(
                "frequency {f} must be positive"
            )));
        }
        let r = pulsim::circuit::filter_frequency_response(&filt, f);
        if r.resonance_warning {
            eprintln!("warning: {f} Hz sits on an undamped resonance");
        }
        println!("{f},{},{}", r.gain, r.phase_deg);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Compare(args) => compare(args),
        Command::Sweep(args) => sweep(args),
        Command::FreqResponse(args) => freq_response(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

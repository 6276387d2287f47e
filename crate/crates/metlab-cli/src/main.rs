//! Command-line driver: load or build a scenario, run the requested
//! experiment, and emit the report as JSON or one of its traces as CSV.
//!
//! Exit codes: 0 when every enabled check passes, 1 when the run finishes
//! with failing checks or dies partway, 2 for usage errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use metlab::harness::{self, catalog, Experiment, Report, ScenarioSpec};

/// Seed used when a catalog scenario is requested without `--seed`.
const DEFAULT_SEED: u64 = 17;

#[derive(Parser)]
#[command(
    name = "metlab",
    version,
    about = "Exponent splittings of matrix cocycles, with every bound checked"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the exponent ladder of a scenario
    Spectrum(RunArgs),
    /// Build the full splitting with per-level diagnostics
    Decompose(RunArgs),
    /// Compare the subadditive estimator modes against each other
    Kingman(RunArgs),
    /// Sweep randomized instances through the inequality suite
    Verify(RunArgs),
    /// Run a scenario and print one of its traces as CSV
    Plotdata(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON file
    #[arg(long, value_name = "FILE", conflicts_with = "catalog")]
    scenario: Option<PathBuf>,
    /// Built-in scenario name (see `--catalog help`)
    #[arg(long, value_name = "NAME")]
    catalog: Option<String>,
    /// Replace the scenario's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the scenario's estimation horizon
    #[arg(long, value_name = "N")]
    n_max: Option<u64>,
    /// Write report.json and trace CSVs here instead of stdout
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; METLAB_THREADS, then all cores, when absent
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Trace id, e.g. kingman-balanced or fast-gap-level-1
    #[arg(long, value_name = "ID")]
    trace: String,
    /// Run this experiment instead of the scenario's own
    #[arg(long, value_name = "NAME")]
    experiment: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Spectrum(a) => run_experiment(a, Experiment::Spectrum),
        Command::Decompose(a) => run_experiment(a, Experiment::Decompose),
        Command::Kingman(a) => run_experiment(a, Experiment::KingmanCompare),
        Command::Verify(a) => run_experiment(a, Experiment::VerifyLemmas),
        Command::Plotdata(a) => plotdata(a),
    };
    result.unwrap_or_else(|msg| {
        eprintln!("error: {msg}");
        ExitCode::from(2)
    })
}

/// Builds the scenario from the arguments; `Err` is a usage problem.
fn load_spec(args: &RunArgs, experiment: Option<Experiment>) -> Result<ScenarioSpec, String> {
    let mut spec = match (&args.scenario, &args.catalog) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            serde_json::from_str::<ScenarioSpec>(&text)
                .map_err(|e| format!("{}: {e}", path.display()))?
        }
        (None, Some(name)) => {
            if name == "help" {
                return Err(format!("catalog scenarios: {}", catalog::CATALOG.join(", ")));
            }
            catalog::build_scenario(name, args.seed.unwrap_or(DEFAULT_SEED))
                .map_err(|e| e.to_string())?
        }
        (None, None) => {
            return Err("a scenario is required: --scenario <file> or --catalog <name>".into())
        }
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(n) = args.n_max {
        spec.parameters.n_max = n;
    }
    if let Some(e) = experiment {
        spec.experiment = e;
    }
    let threads = match args.threads {
        Some(t) => Some(t),
        None => env_threads()?,
    };
    if let Some(t) = threads {
        spec.parameters.threads = t;
    }
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

/// Reads METLAB_THREADS; a set but unparseable value is a usage error
/// rather than a silent fallback.
fn env_threads() -> Result<Option<usize>, String> {
    match std::env::var("METLAB_THREADS") {
        Ok(v) => v
            .parse()
            .map(Some)
            .map_err(|_| format!("METLAB_THREADS must be a thread count, got {v:?}")),
        Err(_) => Ok(None),
    }
}

fn run_experiment(args: RunArgs, experiment: Experiment) -> Result<ExitCode, String> {
    let spec = load_spec(&args, Some(experiment))?;
    let Some(report) = execute(&spec) else {
        return Ok(ExitCode::FAILURE);
    };
    if let Some(dir) = &args.out {
        if let Err(e) = harness::write_report(&report, dir) {
            eprintln!("error: {e}");
            return Ok(ExitCode::FAILURE);
        }
    } else {
        match serde_json::to_string_pretty(&report) {
            Ok(json) => println!("{json}"),
            Err(e) => {
                eprintln!("error: {e}");
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    summarize(&report);
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn parse_experiment(s: &str) -> Result<Experiment, String> {
    match s {
        "spectrum" => Ok(Experiment::Spectrum),
        "decompose" => Ok(Experiment::Decompose),
        "kingman" | "kingman_compare" => Ok(Experiment::KingmanCompare),
        "verify" | "verify_lemmas" => Ok(Experiment::VerifyLemmas),
        _ => Err(format!("unknown experiment {s:?}")),
    }
}

fn plotdata(args: PlotArgs) -> Result<ExitCode, String> {
    let experiment = args.experiment.as_deref().map(parse_experiment).transpose()?;
    let spec = load_spec(&args.run, experiment)?;
    let Some(report) = execute(&spec) else {
        return Ok(ExitCode::FAILURE);
    };
    let csv = harness::emit_plotdata(&report, &args.trace).map_err(|e| {
        let known: Vec<&str> = report.traces.keys().map(String::as_str).collect();
        format!("{e}; available traces: {}", known.join(", "))
    })?;
    if let Some(dir) = &args.run.out {
        if let Err(e) = harness::write_report(&report, dir) {
            eprintln!("error: {e}");
            return Ok(ExitCode::FAILURE);
        }
    }
    print!("{csv}");
    Ok(ExitCode::SUCCESS)
}

/// Runs the scenario; a hard failure is reported and maps to exit 1.
fn execute(spec: &ScenarioSpec) -> Option<Report> {
    match harness::run(spec) {
        Ok(report) => Some(report),
        Err(e) => {
            eprintln!("error: {e}");
            None
        }
    }
}

/// One line per failing check on stderr, plus a tally, so a nonzero exit
/// is never mute.
fn summarize(report: &Report) {
    let total = report.checks.len();
    let passed = report.checks.iter().filter(|c| c.pass).count();
    let name = report.name.as_deref().unwrap_or("scenario");
    eprintln!("{name}: {passed}/{total} checks passed");
    for check in report.checks.iter().filter(|c| !c.pass) {
        eprintln!("  FAIL {} lhs={:.6e} rhs={:.6e}", check.lemma, check.lhs, check.rhs);
    }
}

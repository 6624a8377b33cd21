//! `hawkes`: simulate, fit, and compare Hawkes event series forward and
//! backward in time.
//!
//! Exit codes: 0 ok, 2 configuration or parse error, 3 invalid model,
//! 4 fit failure. A one-line JSON summary goes to stdout; everything meant
//! for humans goes to stderr.

mod commands;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hawkes_core::HawkesError;

#[derive(Debug, Parser)]
#[command(name = "hawkes", version, about = "Hawkes process simulation, estimation and time-arrow tests")]
struct Cli {
    /// Worker threads (0 = available parallelism). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a model given as JSON and write an events CSV.
    Simulate(SimulateArgs),
    /// Fit an events file forward, backward, or both.
    Fit(FitArgs),
    /// Run a seeded forward/backward Monte Carlo sweep.
    Sweep(SweepArgs),
    /// Windowed fits on a recorded events file.
    Empirical(EmpiricalArgs),
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("length").required(true).args(["horizon", "expected_events"])))]
pub struct SimulateArgs {
    /// Model JSON (`dimension`, `baseline`, `kernels`).
    pub model: PathBuf,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Choose the horizon so that this many events are expected.
    #[arg(long)]
    pub expected_events: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Drop events before the intensity first reaches its stationary mean.
    #[arg(long)]
    pub burn_in: bool,
    /// Floor event times to this clock resolution (e.g. 0.001), as recorded data would be.
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Output CSV; the manifest goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Exp,
    Sumexp,
    Powerlaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Standard,
    Modified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Forward,
    Backward,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    NelderMead,
    Lbfgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StructureArg {
    General,
    Symmetric,
    Asymmetric,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Events CSV (`time[,component]`).
    pub events: PathBuf,
    #[arg(long, value_enum, default_value_t = Family::Exp)]
    pub family: Family,
    /// Number of exponential terms for `sumexp`.
    #[arg(long = "P", visible_alias = "terms", default_value_t = 1)]
    pub terms: usize,
    #[arg(long, value_enum, default_value_t = Mode::Standard)]
    pub mode: Mode,
    #[arg(long, value_enum, default_value_t = DirectionArg::Forward)]
    pub direction: DirectionArg,
    #[arg(long, value_enum, default_value_t = OptimizerArg::NelderMead)]
    pub optimizer: OptimizerArg,
    /// Parameter tying for labelled (multivariate) files.
    #[arg(long, value_enum, default_value_t = StructureArg::General)]
    pub structure: StructureArg,
    /// Starting model JSON (default: a moment-based guess).
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Observation horizon (default: sidecar, else the last event).
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Report non-converged fits with exit code 0.
    #[arg(long)]
    pub allow_nonconverged: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmpiricalArgs {
    /// Events CSV (`time[,component][,price]`).
    pub events: PathBuf,
    /// Pipeline JSON; every field is optional.
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn model(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }

    pub fn fit(message: impl Into<String>) -> Self {
        Self { code: 4, message: message.into() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::config(format!("{}: {e}", path.display()))
    }
}

impl From<HawkesError> for CliError {
    fn from(e: HawkesError) -> Self {
        let message = e.to_string();
        match e {
            HawkesError::InvalidParameter(_)
            | HawkesError::NegativeTime(_)
            | HawkesError::Divergent(_)
            | HawkesError::NonStationary(_)
            | HawkesError::NoStationarityReached => Self::model(message),
            HawkesError::InsufficientData(_) => Self::fit(message),
            HawkesError::InvalidSeries(_)
            | HawkesError::Parse { .. }
            | HawkesError::Io(_)
            | HawkesError::Config(_)
            | HawkesError::Mismatch(_) => Self::config(message),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = hawkes_core::Executor::new(cli.jobs);
    let result = exec.install(|| match &cli.command {
        Command::Simulate(a) => commands::simulate_cmd(a, &exec),
        Command::Fit(a) => commands::fit_cmd(a, &exec),
        Command::Sweep(a) => commands::sweep_cmd(a, &exec),
        Command::Empirical(a) => commands::empirical_cmd(a, &exec),
    });
    match result {
        Ok(out) => {
            println!("{}", out.summary);
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            println!("{}", serde_json::json!({ "error": e.message, "exit_code": e.code }));
            ExitCode::from(e.code)
        }
    }
}

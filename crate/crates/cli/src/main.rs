//! `expvar`: explained variance of correlated components from the command line.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use expvar_core::Error;

const EXIT_HELP: &str = "\
Exit codes:
  0  success
  2  invalid input (bad flags, unreadable or inconsistent matrices, rank deficiency)
  3  an iterative solver did not converge (the partial result is still printed)
  4  a demonstration could not construct or verify its witness

Matrix files are headerless CSV, one row per line; scientific notation is accepted.
All numbers are printed with 12 significant digits.";

#[derive(Debug, Parser)]
#[command(name = "expvar", version, about = "Explained variance of correlated principal components", after_help = EXIT_HELP)]
pub struct Cli {
    /// Seed for random starts and simulations.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Write the result to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Output format (each command has its own default).
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Explained variances of the components A Z.
    Compute(ComputeArgs),
    /// Weighted block PCA without orthogonality constraints.
    Solve(SolveArgs),
    /// Simulation experiments driven by a JSON config.
    Experiment(ExperimentArgs),
    /// Constructed examples where a definition misbehaves.
    Demo(DemoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    All,
    Subsp,
    QrNorm,
    UpNorm,
    QrProj,
    UpProj,
    Optproj,
}

#[derive(Debug, Args)]
pub struct ComputeArgs {
    /// Data matrix A (n x p).
    #[arg(long)]
    pub data: PathBuf,
    /// Loadings Z (p x m), unit-norm columns.
    #[arg(long)]
    pub loadings: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub method: Method,
    /// Comma-separated non-increasing positive weights, one per component
    /// (projected definitions only).
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Rescale the columns of Z to unit norm before computing.
    #[arg(long)]
    pub normalize: bool,
    /// Factor QR in the natural column order instead of max-norm pivoting.
    #[arg(long)]
    pub no_pivot: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Data matrix A (n x p).
    #[arg(long)]
    pub data: PathBuf,
    /// Number of components.
    #[arg(long)]
    pub m: usize,
    /// `decreasing` (mu_j = m - j + 1), `constant`, or a comma-separated list.
    #[arg(long, default_value = "decreasing")]
    pub weights: String,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 20_000)]
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    PevCurves,
    Ranking,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub kind: ExperimentKind,
    /// JSON config (keys: name, n, p, m, sigma_head, tail_decay, seed, lambdas,
    /// trials, epsilons, ranking_lambda_count, max_pairs).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the number of trials from the config.
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DemoName {
    Parasitic,
    CounterexampleNorm,
    AnomalySubspace,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(value_enum)]
    pub name: DemoName,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] Error),
    /// A result was printed but the solver did not converge.
    #[error("NonConverged: {0}")]
    NonConverged(String),
    #[error("witness not found: {0}")]
    Witness(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Core(Error::NonConverged { .. }) | CliError::NonConverged(_) => 3,
            CliError::Core(Error::InvariantViolation(_)) => 1,
            CliError::Core(_) => 2,
            CliError::Witness(_) => 4,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

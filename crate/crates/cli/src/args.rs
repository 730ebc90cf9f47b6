use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polyridge::basis::BasisFamily;

#[derive(Debug, Parser)]
#[command(
    name = "polyridge",
    version,
    about = "Fit, evaluate and inspect polynomial ridge approximations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a ridge approximation to CSV samples and write the model as JSON.
    Fit(FitArgs),
    /// Evaluate a model at CSV points; appends a `g` column.
    Predict(PredictArgs),
    /// Emit projected coordinates with observed and fitted values.
    Shadow(ShadowArgs),
    /// Run a built-in numerical study and emit CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Basis {
    Legendre,
    Monomial,
    Hermite,
}

impl From<Basis> for BasisFamily {
    fn from(b: Basis) -> Self {
        match b {
            Basis::Legendre => BasisFamily::Legendre,
            Basis::Monomial => BasisFamily::Monomial,
            Basis::Hermite => BasisFamily::Hermite,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Solver {
    GaussNewton,
    Alternating,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input CSV with a header row (`-` for stdin).
    pub input: PathBuf,
    /// Name of the response column; every other column is an input.
    #[arg(long, default_value = "f")]
    pub target: String,
    /// Subspace dimension n.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub dim: u64,
    /// Total polynomial degree p.
    #[arg(long)]
    pub degree: usize,
    #[arg(long, value_enum, default_value_t = Basis::Legendre)]
    pub basis: Basis,
    #[arg(long, value_enum, default_value_t = Solver::GaussNewton)]
    pub solver: Solver,
    /// Steepest-descent steps per alternating iteration.
    #[arg(long, default_value_t = polyridge::solver::DEFAULT_INNER_STEPS, value_parser = clap::value_parser!(usize))]
    pub inner_steps: usize,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    /// Master seed; drawn from system entropy when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model JSON destination (`-` for stdout).
    #[arg(long, short, default_value = "-")]
    pub output: PathBuf,
    /// Optional CSV of the per-iteration trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Args)]
pub struct Tolerances {
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub beta: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 40)]
    pub max_backtracks: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub tol_residual_change: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol_grad: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub tol_subspace: f64,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    pub model: PathBuf,
    /// CSV containing the model's feature columns (`-` for stdin).
    pub input: PathBuf,
    #[arg(long, short, default_value = "-")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ShadowArgs {
    pub model: PathBuf,
    /// CSV containing the feature columns and the target column.
    pub input: PathBuf,
    /// Observed-value column; defaults to the model's training target.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, short, default_value = "-")]
    pub output: PathBuf,
    /// Separate destination for the fitted-curve table (n = 1 only);
    /// otherwise it follows the points after a blank line.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(2..))]
    pub curve_points: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// One of: convergence, timing, global_min, conditioning, subspace_recovery.
    pub experiment: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub inner_steps: Option<usize>,
    #[arg(long, short, default_value = "-")]
    pub output: PathBuf,
}

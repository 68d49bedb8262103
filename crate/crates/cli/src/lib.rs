//! Experiment runner: argument parsing, config merging, dispatch, output.
//!
//! Every subcommand resolves its parameters with precedence
//! `CLI flag > config file > built-in default`, runs the corresponding
//! core-library experiment under the derived-seed contract, and writes one
//! atomic CSV or JSON result with a full provenance block.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

pub mod config;
pub mod output;
pub mod runner;

use clap::{Args, Parser, Subcommand};

/// Default master seed when neither flag nor config file provides one.
pub const DEFAULT_SEED: u64 = 42;
/// Default worker (substream) count; recorded in output metadata because
/// Monte Carlo chunk sums depend on it.
pub const DEFAULT_WORKERS: usize = 8;

#[derive(Debug, Parser)]
#[command(
    name = "hitrun",
    version,
    about = "Coordinate-free Hit-and-Run sampling and randomized Kaczmarz experiments"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct GlobalArgs {
    /// Master seed for all randomness (substreams are derived from it).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of deterministic substream chunks for parallel estimates.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output path (defaults to `<command>.<ext>` in the working directory).
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// Output format: csv or json.
    #[arg(long, global = true)]
    pub format: Option<String>,
    /// Config file with `[section]`-scoped `key = value` defaults.
    #[arg(long, global = true)]
    pub config: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one Hit-and-Run chain and record its trajectory.
    Sample(SampleArgs),
    /// Synchronously couple two chains and record the squared-gap decay.
    Couple(CoupleArgs),
    /// Contraction rates: closed forms, quadrature, Monte Carlo, or the
    /// `table1` κ-sweep over the four low-dimensional cases.
    Rates(RatesArgs),
    /// One-step overlap: quadrature TV against the explicit bound.
    Overlap(OverlapArgs),
    /// Mixing-time bound (order of magnitude, unit-constant convention).
    MixBound(MixBoundArgs),
    /// Randomized Kaczmarz convergence experiment on a given system.
    Kaczmarz(KaczmarzArgs),
    /// Both Kaczmarz variants on the example system `A(a)x = 0`.
    KaczmarzFigure(KaczmarzFigureArgs),
}

impl Command {
    pub fn kind(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::Couple(_) => "couple",
            Command::Rates(a) => {
                if a.table1.is_some() {
                    "table1"
                } else {
                    "rates"
                }
            }
            Command::Overlap(_) => "overlap",
            Command::MixBound(_) => "mix-bound",
            Command::Kaczmarz(_) => "kaczmarz",
            Command::KaczmarzFigure(_) => "kaczmarz-figure",
        }
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Covariance: `diag:v1,...` or `file:matrix.csv`.
    #[arg(long)]
    pub cov: Option<String>,
    /// Direction law: uniform | axes | axes:w,.. | rows:file | support:file.
    #[arg(long)]
    pub tau: Option<String>,
    /// Start point: comma list, or `target` for an exact stationary draw.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CoupleArgs {
    #[arg(long)]
    pub cov: Option<String>,
    #[arg(long)]
    pub tau: Option<String>,
    /// Start point of the first chain (comma list).
    #[arg(long, allow_hyphen_values = true)]
    pub a0: Option<String>,
    /// Start point of the second chain (comma list).
    #[arg(long, allow_hyphen_values = true)]
    pub b0: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    /// Run the κ-sweep over the four low-dimensional cases instead of a
    /// single configuration.
    #[arg(value_parser = ["table1"])]
    pub table1: Option<String>,
    /// κ values for the sweep (comma list).
    #[arg(long)]
    pub kappas: Option<String>,
    /// Single case: bivariate | 3d-low | 3d-high | 4d-low | two-scale | general.
    #[arg(long)]
    pub case: Option<String>,
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Low-mode block size for the two-scale case.
    #[arg(long)]
    pub d1: Option<usize>,
    /// High-mode block size for the two-scale case.
    #[arg(long)]
    pub d2: Option<usize>,
    /// Covariance for `--case general`.
    #[arg(long)]
    pub cov: Option<String>,
    /// Direction law for `--case general`.
    #[arg(long)]
    pub tau: Option<String>,
    /// Estimator: auto | exact | quad:N | mc:N.
    #[arg(long)]
    pub estimator: Option<String>,
}

#[derive(Debug, Args)]
pub struct OverlapArgs {
    #[arg(long)]
    pub cov: Option<String>,
    /// First start point (comma list).
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    /// Second start point (comma list).
    #[arg(long, allow_hyphen_values = true)]
    pub xt: Option<String>,
    /// Regularization parameter ε ∈ (0,1).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Quadrature grid, e.g. `r:2048,theta:4096`.
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct MixBoundArgs {
    /// Covariance supplying κ, M, m and the dimension.
    #[arg(long)]
    pub cov: Option<String>,
    /// Contraction rate ρ.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Target total-variation accuracy ε.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Initial Wasserstein distance `W²_{C^{-1/2}}(γ, ν)`.
    #[arg(long)]
    pub w2: Option<f64>,
    /// Outer absolute constant (theorem leaves it unspecified; default 1).
    #[arg(long)]
    pub c: Option<f64>,
    /// Inner absolute constant (default 1).
    #[arg(long)]
    pub cprime: Option<f64>,
}

#[derive(Debug, Args)]
pub struct KaczmarzArgs {
    /// System matrix: `file:path.csv` or `example:a=0.1`.
    #[arg(long)]
    pub matrix: Option<String>,
    /// Right-hand side: `zero`, `file:path.csv`, or an inline comma list.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,
    /// Variant: classical | free | tau:<law spec>.
    #[arg(long)]
    pub variant: Option<String>,
    /// Start point (comma list).
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Iteration count (defaults to ≈ 6/ρ).
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
}

#[derive(Debug, Args)]
pub struct KaczmarzFigureArgs {
    /// Row-collinearity parameter a ∈ (0,1) of the example matrix.
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Iteration count per variant (defaults to ≈ 6/ρ of each variant).
    #[arg(long)]
    pub iters: Option<usize>,
}

/// Parse arguments and run; returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message; usage problems are config errors
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match runner::run(cli) {
        Ok(path) => {
            println!("wrote {path}");
            0
        }
        Err(runner::RunError::Config(e)) => {
            eprintln!("{e}");
            2
        }
        Err(runner::RunError::Numerical(e)) => {
            eprintln!("numerical failure: {e}");
            3
        }
        Err(runner::RunError::Io(e)) => {
            eprintln!("io failure: {e}");
            3
        }
    }
}

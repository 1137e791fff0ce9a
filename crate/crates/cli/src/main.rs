#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use compact_gp::kernel::{BasisFamily, TargetFamily};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 1,
            CliError::Solver(_) => 2,
        }
    }
}

impl From<compact_gp::Error> for CliError {
    fn from(e: compact_gp::Error) -> Self {
        use compact_gp::Error as E;
        match e {
            E::InvalidParameter(_)
            | E::OrderOutOfRange { .. }
            | E::DimensionMismatch { .. }
            | E::UnsortedInput { .. }
            | E::DuplicatePoints { .. }
            | E::Json(_) => CliError::Input(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "compact-gp", version, about = "Gaussian processes with learnable compactly supported kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a compact kernel to a classical target kernel by L2 projection.
    Approx(ApproxArgs),
    /// Learn a compact kernel from `x,y` data by maximum likelihood.
    Fit(FitArgs),
    /// Posterior mean and variance at query points.
    Predict(PredictArgs),
    /// Draw a synthetic dataset from a kernel.
    Sample(SampleArgs),
    /// Time dense versus sparse posterior-mean inference over problem sizes.
    Bench(BenchArgs),
    /// Numerical dimension of the span of the correlation functions.
    Rank(RankArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct ApproxArgs {
    /// se, ou, matern52, sinc or wendland1..4
    #[arg(long)]
    #[serde(serialize_with = "as_display")]
    pub target: TargetArg,
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lengthscale: f64,
    #[arg(long, default_value = "fourier")]
    #[serde(serialize_with = "as_display")]
    pub basis: BasisArg,
    #[arg(long, default_value_t = 5)]
    pub order: usize,
    #[arg(long, default_value_t = 5.0)]
    pub cutoff: f64,
    /// Drop the tr(AΦ(0)) = K(0) constraint.
    #[arg(long)]
    pub no_peak_match: bool,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 64)]
    pub panels: usize,
    #[arg(long, default_value_t = 32)]
    pub nodes: usize,
    /// Noise variance stored in the kernel file.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value = "kernel.json")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    None,
    Interleave,
}

#[derive(Args, Debug, Serialize)]
pub struct FitArgs {
    /// CSV with header `x,y`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "fourier")]
    #[serde(serialize_with = "as_display")]
    pub basis: BasisArg,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    /// Candidate cutoffs, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    pub cutoffs: Vec<f64>,
    /// Fix the noise variance instead of learning it.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, default_value_t = 0.02)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    /// Stochastic trace gradients with sparse CG solves; needs ascending x.
    #[arg(long)]
    pub sparse: bool,
    #[arg(long, default_value_t = 16)]
    pub probes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `interleave` trains on even rows and reports test metrics on odd rows.
    #[arg(long, value_enum, default_value = "none")]
    pub split: Split,
    #[arg(long, default_value = "fit.json")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Dense,
    Sparse,
}

#[derive(Args, Debug, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub kernel: PathBuf,
    /// CSV with header `x,y`.
    #[arg(long)]
    pub train: PathBuf,
    /// CSV with a column `x`.
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long, value_enum, default_value = "dense")]
    pub mode: ModeArg,
    /// Override the kernel file's noise variance.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub mean_only: bool,
    #[arg(long)]
    pub jacobi: bool,
    #[arg(long, default_value_t = 1e-10)]
    pub cg_tol: f64,
    #[arg(long, default_value = "predictions.csv")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Even,
    Uniform,
}

#[derive(Args, Debug, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub kernel: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "even")]
    pub spacing: Spacing,
    #[arg(long, default_value_t = 0.0)]
    pub start: f64,
    /// Defaults to `start + n - 1` (unit spacing).
    #[arg(long)]
    pub end: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "data.csv")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMode {
    Both,
    Dense,
    Sparse,
}

#[derive(Args, Debug, Serialize)]
pub struct BenchArgs {
    #[arg(long)]
    pub kernel: PathBuf,
    /// Ascending problem sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1024,2048,4096,8192,16384,32768")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub repetitions: usize,
    #[arg(long, default_value_t = 1.0)]
    pub spacing: f64,
    /// Defaults to the kernel file's noise, or 0.1 when that is zero.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, value_enum, default_value = "both")]
    pub mode: BenchMode,
    #[arg(long, default_value_t = 1e-10)]
    pub cg_tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "bench.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct RankArgs {
    #[arg(long, default_value = "fourier")]
    #[serde(serialize_with = "as_display")]
    pub basis: BasisArg,
    #[arg(long)]
    pub order: usize,
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct BasisArg(pub BasisFamily);

impl std::str::FromStr for BasisArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.parse().map(BasisArg).map_err(|e: compact_gp::Error| e.to_string())
    }
}

impl std::fmt::Display for BasisArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TargetArg(pub TargetFamily);

impl std::str::FromStr for TargetArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.parse().map(TargetArg).map_err(|e: compact_gp::Error| e.to_string())
    }
}

impl std::fmt::Display for TargetArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.0.name())
    }
}

fn as_display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("COMPACT_GP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("COMPACT_GP_THREADS must be a non-negative integer, got '{raw}'")))?;
    #[cfg(feature = "parallel")]
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(e.to_string()))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let run = configure_threads().and_then(|()| match cli.command {
        Command::Approx(a) => commands::approx(a),
        Command::Fit(a) => commands::fit(a),
        Command::Predict(a) => commands::predict(a),
        Command::Sample(a) => commands::sample(a),
        Command::Bench(a) => commands::bench(a),
        Command::Rank(a) => commands::rank(a),
    });
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

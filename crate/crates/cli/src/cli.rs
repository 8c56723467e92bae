//! Command-line grammar.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "nc-bayes", version, about = "Noise-contrastive Bayesian inference with Pólya–Gamma Gibbs sampling")]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (falls back to the config file, then NC_BAYES_SEED, then 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for independent replications.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory; every artifact of the run is written inside it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check Pólya–Gamma sampler moments and print a JSON report.
    PgSelftest(PgArgs),
    /// Time-varying density estimation.
    #[command(subcommand)]
    Tv(TvCommand),
    /// Torus graphs for multivariate angles.
    #[command(subcommand)]
    Torus(TorusCommand),
    /// Re-run a benchmark table at desk scale.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct RunLength {
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PgArgs {
    /// Draws per tilt value.
    #[arg(long, default_value_t = 100_000)]
    pub draws: usize,
}

#[derive(Debug, Subcommand)]
pub enum TvCommand {
    /// Simulate replications of a synthetic scenario and score them.
    Simulate(TvSimulateArgs),
    /// Fit monthly incident locations from a CSV file.
    Fit(TvFitArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct TvModelArgs {
    /// n1 (common box), n2 (per-time box) or adaptive.
    #[arg(long)]
    pub noise: Option<String>,
    #[arg(long)]
    pub basis_count: Option<usize>,
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Redraw uniform noise sets every iteration.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub refresh: Option<bool>,
    #[command(flatten)]
    pub run: RunLength,
}

#[derive(Debug, Args)]
pub struct TvSimulateArgs {
    /// 1 (moving mixture) or 2 (ring).
    #[arg(long)]
    pub scenario: u32,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub times: Option<usize>,
    #[arg(long)]
    pub per_time: Option<usize>,
    #[arg(long)]
    pub eval_points: Option<usize>,
    #[command(flatten)]
    pub model: TvModelArgs,
}

#[derive(Debug, Args)]
pub struct TvFitArgs {
    /// CSV with columns month, longitude, latitude.
    #[arg(long)]
    pub input: PathBuf,
    /// Keep only rows inside LON_MIN,LON_MAX,LAT_MIN,LAT_MAX.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub bounds: Option<Vec<f64>>,
    /// Grid points per axis for the density output.
    #[arg(long)]
    pub grid: Option<usize>,
    #[command(flatten)]
    pub model: TvModelArgs,
}

#[derive(Debug, Subcommand)]
pub enum TorusCommand {
    /// Simulate replications of a graph scenario and score edge recovery.
    Simulate(TorusSimulateArgs),
    /// Fit a torus graph to phase data by NC-Bayes.
    Fit(TorusFitArgs),
    /// Fit a torus graph by the score-based generalized posterior.
    FitHbayes(HBayesArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct EdgeArgs {
    /// Median-rule threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Credible level of the interval rule, in (0, 1).
    #[arg(long)]
    pub level: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TorusSimulateArgs {
    /// chain, cycle5 or er30.
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub reps: Option<usize>,
    /// hs, ghs, rghs or gaussian.
    #[arg(long)]
    pub prior: Option<String>,
    /// Adaptive noise updating: on or off.
    #[arg(long, value_parser = ["on", "off"])]
    pub noise_update: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub tau_fixed: Option<bool>,
    #[command(flatten)]
    pub edges: EdgeArgs,
    #[command(flatten)]
    pub run: RunLength,
}

#[derive(Debug, Args, Clone)]
pub struct PhaseInput {
    /// CSV of angles in radians, one column per channel (optional header).
    #[arg(long)]
    pub input: PathBuf,
    /// JSON channel labels; defaults to the input path with a .json extension when present.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TorusFitArgs {
    #[command(flatten)]
    pub data: PhaseInput,
    #[arg(long)]
    pub prior: Option<String>,
    #[arg(long, value_parser = ["on", "off"])]
    pub noise_update: Option<String>,
    /// Keep adapting the noise after burn-in.
    #[arg(long)]
    pub adapt_throughout: bool,
    /// Fix the global shrinkage scale from the expected signal share.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub tau_fixed: Option<bool>,
    #[arg(long)]
    pub noise_count: Option<usize>,
    #[command(flatten)]
    pub edges: EdgeArgs,
    #[command(flatten)]
    pub run: RunLength,
}

#[derive(Debug, Args)]
pub struct HBayesArgs {
    #[command(flatten)]
    pub data: PhaseInput,
    /// Loss scale.
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long)]
    pub prior: Option<String>,
    #[command(flatten)]
    pub edges: EdgeArgs,
    #[command(flatten)]
    pub run: RunLength,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// 1, 2, 3, s1, s2, s3 or s4.
    #[arg(long)]
    pub table: String,
    #[arg(long)]
    pub reps: Option<usize>,
    #[command(flatten)]
    pub run: RunLength,
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "synthforge", version, about = "Privacy-preserving synthetic tabular data")]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a dataset and audit the result.
    Synth(SynthArgs),
    /// Compare two aligned datasets for privacy and fidelity.
    Audit(AuditArgs),
    /// Run a named simulation preset over repeated trials.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerArg {
    Sh,
    Random,
    Weibull,
    Cauchy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelArg {
    Wendland,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingArg {
    None,
    #[serde(alias = "min-max")]
    Minmax,
}

/// Settings shared by `synth` and `experiment`. Every flag overrides the
/// same key from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct PlanArgs {
    /// TOML file with default settings.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Fixed hybrid weight in [0, 1].
    #[arg(long, conflicts_with = "lid_budget")]
    pub alpha: Option<f64>,

    /// Target LID in percent; α is solved from the uniform-marginal bound.
    #[arg(long, value_name = "PERCENT")]
    pub lid_budget: Option<f64>,

    /// Attribute range width used by --lid-budget (default: narrowest column range).
    #[arg(long, requires = "lid_budget")]
    pub range_width: Option<f64>,

    /// Attack tolerance for the LID audit.
    #[arg(long)]
    pub eta: Option<f64>,

    #[arg(long, value_enum)]
    pub sampler: Option<SamplerArg>,

    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,

    /// Width of the Gaussian kernel.
    #[arg(long)]
    pub kernel_width: Option<f64>,

    /// Comma-separated ridge penalties tried by cross-validation.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub lambda_grid: Option<Vec<f64>>,

    /// Comma-separated KDE bandwidths in units of each column's standard deviation.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub bandwidth_grid: Option<Vec<f64>>,

    /// Seed (falls back to SYNTHFORGE_SEED, then 0).
    #[arg(long)]
    pub seed: Option<u64>,

    /// Worker threads (default: logical cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,

    #[arg(long, value_enum)]
    pub scaling: Option<ScalingArg>,

    /// Histogram bins for the TV norm.
    #[arg(long)]
    pub bins: Option<usize>,

    /// Report the uniform-marginal LID bound in fixed-α mode too.
    #[arg(long)]
    pub assume_uniform: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Input CSV with a header row.
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,

    /// Output prefix (default: input path without extension plus `.synth`).
    #[arg(long, value_name = "PREFIX")]
    pub out: Option<PathBuf>,

    /// Comma-separated input columns (names or 0-based indices).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub inputs: Option<Vec<String>>,

    /// Response column (name or 0-based index; default: last column).
    #[arg(long)]
    pub response: Option<String>,

    #[command(flatten)]
    pub plan: PlanArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    #[arg(long, value_name = "PATH")]
    pub original: PathBuf,

    #[arg(long, value_name = "PATH")]
    pub synthetic: PathBuf,

    /// Comma-separated columns to audit (default: all).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub inputs: Option<Vec<String>>,

    #[arg(long, default_value_t = synthforge::plan::DEFAULT_ETA)]
    pub eta: f64,

    #[arg(long, default_value_t = synthforge::audit::DEFAULT_BIN_COUNT)]
    pub bins: usize,

    /// Output prefix.
    #[arg(long, value_name = "PREFIX", default_value = "audit")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// nonlinear, price-sale, mismatch-nonlinear or mismatch-price.
    pub preset: String,

    /// Comma-separated α values (the mismatch presets use the first).
    #[arg(long, value_delimiter = ',', num_args = 1.., conflicts_with = "alpha")]
    pub alphas: Option<Vec<f64>>,

    #[arg(long, default_value_t = 10)]
    pub trials: usize,

    /// Also score models trained on public plus synthetic data.
    #[arg(long)]
    pub delta_mse: bool,

    /// Output prefix (default: the preset name).
    #[arg(long, value_name = "PREFIX")]
    pub out: Option<PathBuf>,

    #[command(flatten)]
    pub plan: PlanArgs,
}

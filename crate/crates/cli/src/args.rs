use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use coalesce::{DEFAULT_ANCHOR_WEIGHT, DEFAULT_CHUNK_SIZE, DEFAULT_EXHAUSTIVE_CAP, DEFAULT_KAPPA_MULTIPLIER};

#[derive(Debug, Parser)]
#[command(name = "coalesce", version, about = "Fast approximate conditional Shapley values for tabular models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Explain rows and write their Shapley values.
    Explain(ExplainArgs),
    /// Run the approximate and exact methods on the same plan and report deviations.
    Compare(CompareArgs),
    /// Time the batched solver against one-at-a-time refits on synthetic data.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Training table (CSV with header).
    #[arg(long)]
    pub train: PathBuf,
    /// Column of the training table holding the model predictions.
    #[arg(long, conflicts_with = "predictions", required_unless_present = "predictions")]
    pub target: Option<String>,
    /// Single-column CSV of model predictions on the training rows.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Rows to explain (CSV with the feature columns); defaults to the training rows.
    #[arg(long)]
    pub explain: Option<PathBuf>,
    /// Columns forced to categorical.
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
    /// Columns forced to numeric.
    #[arg(long, value_delimiter = ',')]
    pub numeric: Vec<String>,
    /// Columns to drop (identifiers, unused covariates).
    #[arg(long, value_delimiter = ',')]
    pub ignore: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CoalitionMode {
    All,
    Sample(usize),
}

impl FromStr for CoalitionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            return Ok(CoalitionMode::All);
        }
        match s.strip_prefix("sample:").map(str::parse::<usize>) {
            Some(Ok(n)) if n > 0 => Ok(CoalitionMode::Sample(n)),
            _ => Err(format!("expected `all` or `sample:N` with N >= 1, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    /// Coalitions to use: `all` or `sample:N`.
    #[arg(long, default_value = "all")]
    pub coalitions: CoalitionMode,
    /// Seed for coalition sampling.
    #[arg(long, env = "COALESCE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Kernel weight of the empty and full coalitions.
    #[arg(long, default_value_t = DEFAULT_ANCHOR_WEIGHT)]
    pub anchor_weight: f64,
    /// Penalty as a multiple of the largest Gram diagonal entry.
    #[arg(long, default_value_t = DEFAULT_KAPPA_MULTIPLIER)]
    pub kappa_multiplier: f64,
    /// Coalition blocks materialized per chunk.
    #[arg(long, default_value_t = DEFAULT_CHUNK_SIZE as u64, value_parser = clap::value_parser!(u64).range(1..))]
    pub chunk_size: u64,
    /// Factor each chunk as one assembled sparse block-diagonal matrix.
    #[arg(long)]
    pub joint_assembly: bool,
    /// Worker threads (default: all cores).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    /// Largest feature count allowed with `--coalitions all`.
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_CAP)]
    pub exhaustive_cap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Approx,
    Exact,
    Both,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solve: SolveArgs,
    #[arg(long, value_enum, default_value_t = Method::Approx)]
    pub method: Method,
    /// Shapley value CSV.
    #[arg(long, default_value = "shapley.csv")]
    pub output: PathBuf,
    /// Also write the per-coalition contribution table (row_id, mask, v).
    #[arg(long)]
    pub emit_v: Option<PathBuf>,
    /// Run manifest (JSON); defaults to `<output>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solve: SolveArgs,
    /// Largest accepted max |Δφ|, relative to max |φ_exact|.
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
    /// Deviation report (JSON).
    #[arg(long, default_value = "compare.json")]
    pub output: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    /// Feature counts to benchmark.
    #[arg(long, value_delimiter = ',', default_value = "8,10,12")]
    pub p_grid: Vec<usize>,
    /// Synthetic training rows.
    #[arg(long, default_value_t = 2000)]
    pub rows: usize,
    /// Categorical features among the p (capped at p − 1).
    #[arg(long, default_value_t = 2)]
    pub n_categorical: usize,
    /// Levels per categorical feature.
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    #[arg(long, env = "COALESCE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_KAPPA_MULTIPLIER)]
    pub kappa_multiplier: f64,
    #[arg(long, default_value_t = DEFAULT_CHUNK_SIZE as u64, value_parser = clap::value_parser!(u64).range(1..))]
    pub chunk_size: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    /// Timing table (CSV).
    #[arg(long, default_value = "bench.csv")]
    pub output: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

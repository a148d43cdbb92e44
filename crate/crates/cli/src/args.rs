use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ldm_core::compiler::PlanMode;
use ldm_core::sampler::SamplerConfig;

#[derive(Debug, Parser)]
#[command(name = "ldm", version, about = "Bayesian modeling of longitudinal data with missing values")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a model; exit status 1 on any diagnostic.
    Check { model: PathBuf },
    /// Write the two-slice dependency graph as DOT.
    Graph {
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Draw every variable from the model, holding observed data fixed.
    Simulate(SimulateArgs),
    /// Fit a model to data with NUTS.
    Sample(SampleArgs),
    /// Posterior summary table of a draws file.
    Summary {
        draws: PathBuf,
        /// JSON output; `summary.json` next to the draws file when omitted.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// NLL, AIC and BIC of a finished `sample` run.
    Ic {
        /// Output directory of `sample`.
        run: PathBuf,
    },
    /// Time fused against unrolled plans over series lengths and missing rates.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Data CSV files. Columns named like a model index are index columns.
    #[arg(short, long = "data", value_name = "CSV")]
    pub data: Vec<PathBuf>,
    /// Observed variables; defaults to every variable with a data column.
    #[arg(long, value_delimiter = ',')]
    pub obs: Option<Vec<String>>,
}

#[derive(Debug, Clone, Args)]
pub struct SamplerArgs {
    #[arg(long, default_value_t = 500)]
    pub warmup: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.8)]
    pub target_accept: f64,
    #[arg(long, default_value_t = 10)]
    pub max_depth: u32,
}

impl SamplerArgs {
    pub fn config(&self) -> SamplerConfig {
        SamplerConfig {
            n_warmup: self.warmup,
            n_samples: self.samples,
            n_chains: self.chains,
            target_accept: self.target_accept,
            max_tree_depth: self.max_depth,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    #[arg(required_unless_present = "replay")]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Compile without block fusion.
    #[arg(long)]
    pub no_optimize: bool,
    /// Output directory for draws.csv, stats.csv and manifest.json.
    #[arg(short, long, default_value = "ldm_out")]
    pub out: PathBuf,
    /// Re-run the model, data and settings recorded in a manifest.
    #[arg(long, value_name = "MANIFEST", conflicts_with = "model")]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of joint draws; with one draw the `draw` column is dropped so
    /// the output can be fed back to `sample`.
    #[arg(long, default_value_t = 1)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hold scalar parameters at these values, e.g. `a=0.9,b=0.1`.
    #[arg(long, value_delimiter = ',', value_name = "NAME=VALUE")]
    pub fix: Vec<String>,
    /// Delete a fraction of a column completely at random, e.g. `y=0.2`.
    #[arg(long, value_delimiter = ',', value_name = "NAME=RATE")]
    pub missing: Vec<String>,
    #[arg(short, long, default_value = "ldm_sim")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    pub model: PathBuf,
    /// Fully observed data for the longest series.
    #[arg(short, long = "data", value_name = "CSV", required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub obs: Option<Vec<String>>,
    /// Time index; the time axis of the first fused group when omitted.
    #[arg(long)]
    pub index: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "20,100,200,300")]
    pub sizes: Vec<i64>,
    /// Missing rates in percent.
    #[arg(long, value_delimiter = ',', default_value = "0,5,10,20")]
    pub rates: Vec<f64>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(short, long, default_value = "bench.csv")]
    pub out: PathBuf,
}

impl SampleArgs {
    pub fn mode(&self) -> PlanMode {
        if self.no_optimize {
            PlanMode::Unrolled
        } else {
            PlanMode::Fused
        }
    }
}

/// Splits `name=value` pairs.
pub fn parse_pairs(items: &[String]) -> anyhow::Result<Vec<(String, f64)>> {
    items
        .iter()
        .map(|s| {
            let (k, v) = s.split_once('=').ok_or_else(|| anyhow::anyhow!("expected NAME=VALUE, got `{s}`"))?;
            let v: f64 = v.trim().parse().map_err(|_| anyhow::anyhow!("`{v}` is not a number"))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "iin", version, about = "Iterative LSTM imputation of multi-sensor time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// JSON config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "IIN_OUT_DIR", default_value = "iin-out")]
    pub out: PathBuf,

    /// Single-threaded execution with a fixed reduction order.
    #[arg(long, global = true)]
    pub deterministic: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic correlated multi-sensor CSV.
    Gen(GenArgs),
    /// Hold out observed cells as ground truth.
    Simulate(SimulateArgs),
    /// Initialize, run the imputation cascade and score it.
    Run(RunArgs),
    /// Repeat `run` over several simulated missing rates.
    Sweep(SweepArgs),
    /// Run the cascade from several initializers.
    CompareInit(CompareArgs),
    /// Score a dense imputed CSV against a ground-truth sidecar.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub sensors: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub phase_jitter: Option<f64>,
    #[arg(long)]
    pub amplitude_jitter: Option<f64>,
    #[arg(long)]
    pub start_hour: Option<i64>,
    /// File name inside the output directory.
    #[arg(long, default_value = "synthetic.csv")]
    pub file: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// random, fraction20, block or position-copy.
    #[arg(long, default_value = "random")]
    pub mechanism: String,
    #[arg(long, default_value_t = 0.2)]
    pub rate: f64,
    /// Source month `YYYY-MM` for position-copy.
    #[arg(long)]
    pub source: Option<String>,
    /// Target month `YYYY-MM` for position-copy.
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub block_min: usize,
    #[arg(long, default_value_t = 24)]
    pub block_max: usize,
}

/// Training overrides applied on top of the config file.
#[derive(Debug, Default, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub w: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// standard or phased.
    #[arg(long)]
    pub cell: Option<String>,
    /// mixed or separate.
    #[arg(long)]
    pub mode: Option<String>,
    /// global_zscore, per_sensor_zscore or none.
    #[arg(long)]
    pub normalization: Option<String>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Feed the current estimate of the center entry to the encoders.
    #[arg(long)]
    pub include_center: bool,
    /// Retrain from a fresh initialization every round.
    #[arg(long)]
    pub cold_start: bool,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Ground-truth sidecar (`sensor_id,timestamp,true_value`).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Sensor coordinates (`sensor_id,x,y`) for the idw-ses initializer.
    #[arg(long)]
    pub coords: Option<PathBuf>,
    /// Minimum run length of a temporal block.
    #[arg(long, default_value_t = 11)]
    pub block_len: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// nearest, window-mean[:W], global-mean or idw-ses[:P:A].
    #[arg(long, default_value = "nearest")]
    pub init: String,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated missing rates.
    #[arg(long)]
    pub rates: Option<String>,
    #[arg(long, default_value = "nearest")]
    pub init: String,
    #[arg(long, default_value_t = 11)]
    pub block_len: usize,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated initializers.
    #[arg(long, default_value = "nearest,window-mean:3,global-mean,idw-ses")]
    pub inits: String,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Dense imputed CSV in the input schema.
    #[arg(long)]
    pub imputed: PathBuf,
}

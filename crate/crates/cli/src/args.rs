use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "kernet", version, about = "Fit, fine-tune, evaluate and inspect survival kernets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compress a labeled dataset into a model file.
    Fit(FitArgs),
    /// Survival curves for query embeddings.
    Predict(PredictArgs),
    /// Time-dependent concordance on a labeled dataset.
    Evaluate(EvaluateArgs),
    /// Fine-tune the cluster summaries of an existing model.
    Finetune(FinetuneArgs),
    /// Heatmaps, cluster curves, superclusters and attributions.
    Clusters(ClustersArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Gaussian,
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IndexArg {
    Exact,
    Graph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceArg {
    /// Fine-tuned summaries when the model has them, raw otherwise.
    Auto,
    Raw,
    FineTuned,
}

/// How CSV columns map onto the dataset.
#[derive(Debug, Clone, Args)]
pub struct SchemaArgs {
    #[arg(long, default_value = "time")]
    pub time_col: String,
    #[arg(long, default_value = "event")]
    pub event_col: String,
    /// Comma-separated embedding columns (default: every other column).
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["embedding_prefix", "embeddings"])]
    pub embedding_cols: Option<Vec<String>>,
    /// Use every column whose name starts with this prefix as an embedding coordinate.
    #[arg(long, conflicts_with = "embeddings")]
    pub embedding_prefix: Option<String>,
    /// Binary embedding matrix with one row per CSV row.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Continuous raw feature column kept for interpretation (repeatable).
    #[arg(long = "feature")]
    pub features: Vec<String>,
    /// Categorical raw feature column kept for interpretation (repeatable).
    #[arg(long = "categorical")]
    pub categorical: Vec<String>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    /// Epsilon-net radius as a fraction of tau, in (0, 1).
    #[arg(long, default_value_t = 0.25)]
    pub beta: f64,
    /// Truncation distance (default sqrt(ln 10)).
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, value_enum, default_value_t = KernelArg::Gaussian)]
    pub kernel: KernelArg,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 128)]
    pub max_neighbors: usize,
    /// Equal-width time bins; 0 uses every unique event time.
    #[arg(long, default_value_t = 0)]
    pub time_bins: usize,
    #[arg(long, value_enum, default_value_t = IndexArg::Exact)]
    pub index: IndexArg,
    #[arg(long, default_value_t = 16)]
    pub graph_degree: usize,
    #[arg(long, default_value_t = 64)]
    pub graph_beam: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Project embeddings onto the sphere of this radius before fitting.
    #[arg(long)]
    pub sphere_radius: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Also emit hazards.
    #[arg(long)]
    pub hazards: bool,
    /// Comma-separated times at which to report interpolated survival.
    #[arg(long, value_delimiter = ',')]
    pub at: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = SourceArg::Auto)]
    pub source: SourceArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    /// Bootstrap resamples for a percentile interval (200 when given without a value).
    #[arg(long, num_args = 0..=1, default_missing_value = "200")]
    pub bootstrap: Option<usize>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Also report the mean concordance over random groups of this size (16384 when given without a value).
    #[arg(long, num_args = 0..=1, default_missing_value = "16384")]
    pub subsample_group: Option<usize>,
    /// Read curves with linear interpolation instead of as step functions.
    #[arg(long)]
    pub interpolate: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SourceArg::Auto)]
    pub source: SourceArg,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub val: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
    #[arg(long, default_value_t = 0.01)]
    pub eta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_rank: f64,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1024)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ClustersArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Training data, needed for heatmaps.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub schema: SchemaArgs,
    /// Restrict heatmaps and curves to the largest clusters.
    #[arg(long)]
    pub top: Option<usize>,
    #[arg(long)]
    pub heatmap: bool,
    /// Per-cluster survival curves (with Greenwood bands for raw summaries).
    #[arg(long)]
    pub curves: bool,
    #[arg(long)]
    pub superclusters: Option<usize>,
    /// Query CSV whose contributing clusters are listed.
    #[arg(long)]
    pub attribute: Option<PathBuf>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, value_enum, default_value_t = SourceArg::Auto)]
    pub source: SourceArg,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

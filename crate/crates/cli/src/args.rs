use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "boltzkern",
    version,
    about = "Learned spectral kernels for Nadaraya-Watson regression"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train spectral parameters on the LOO NW loss.
    Train(TrainArgs),
    /// Score parameters over a list of feature counts S.
    Evaluate(EvaluateArgs),
    /// Grid-tuned Gaussian-kernel NW.
    Baseline(BaselineArgs),
    /// Draw frequencies and write them with per-coordinate histograms.
    SampleSpectrum(SpectrumArgs),
    /// Write the training-set kernel matrix before and/or after training.
    KernelDump(KernelDumpArgs),
    /// Answer sampler requests on stdin by exact enumeration.
    ServeSampler(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataFormat {
    Csv,
    Libsvm,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset path, or `sinc` for synthetic data.
    #[arg(long)]
    pub data: String,
    /// Input format; inferred from the extension when omitted (`.csv` or LIBSVM).
    #[arg(long, value_enum)]
    pub format: Option<DataFormat>,
    /// Zero-based target column for CSV input; defaults to the last column.
    #[arg(long)]
    pub target_col: Option<usize>,
    /// CSV input has a header row.
    #[arg(long)]
    pub header: bool,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Seed for the split and synthetic data; defaults to `--seed`.
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long, default_value_t = 300)]
    pub sinc_n: usize,
    #[arg(long, default_value_t = 2)]
    pub sinc_d: usize,
    #[arg(long, default_value_t = 0.05)]
    pub sinc_noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Exact,
    Gibbs,
    External,
}

#[derive(Debug, Clone, Args)]
pub struct SamplerArgs {
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Command line of an external sampler (whitespace separated).
    #[arg(long)]
    pub sampler_cmd: Option<String>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thinning: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Defaults to the config file's seed, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON training config; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
    /// Sampler reads per iteration; defaults to half the training set.
    #[arg(long)]
    pub reads: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub n_visible: Option<usize>,
    #[arg(long)]
    pub n_hidden: Option<usize>,
    /// Leave-one-out control variate in the gradient.
    #[arg(long)]
    pub baseline_subtraction: bool,
    /// Record per-iteration wall time (makes history non-reproducible).
    #[arg(long)]
    pub timing: bool,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Parameters JSON; with `--untrained` and no file, the seeded initialization is used.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Label results as before training.
    #[arg(long)]
    pub untrained: bool,
    #[arg(long, value_delimiter = ',', default_values_t = boltzkern::evaluation::DEFAULT_S_LIST)]
    pub s_list: Vec<usize>,
    /// Also report NW with LLR at endpoint queries.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub llr_endpoints: bool,
    /// Frequency resampling seeds per S, starting at `--seed`.
    #[arg(long, default_value_t = 1)]
    pub repeats: u64,
    #[arg(long, default_value_t = boltzkern::regression::DEFAULT_NW_EPS)]
    pub eps: f64,
    #[arg(long, default_value_t = 4)]
    pub n_visible: usize,
    #[arg(long, default_value_t = 4)]
    pub n_hidden: usize,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Bandwidth grid; defaults to powers of two from 2^-6 to 2^4.
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    #[arg(long, default_value_t = boltzkern::regression::DEFAULT_NW_EPS)]
    pub eps: f64,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Use the seeded initialization of this input dimension instead of a file.
    #[arg(long)]
    pub untrained_dim: Option<usize>,
    #[arg(short = 'S', long = "samples", default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    #[arg(long, default_value_t = 4)]
    pub n_visible: usize,
    #[arg(long, default_value_t = 4)]
    pub n_hidden: usize,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct KernelDumpArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Training run directory holding params_init.json and params_final.json.
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub params_pre: Option<PathBuf>,
    #[arg(long)]
    pub params_post: Option<PathBuf>,
    #[arg(short = 'S', long = "samples", default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

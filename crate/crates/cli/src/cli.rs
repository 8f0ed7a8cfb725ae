use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::EmclSection;

#[derive(Debug, Parser)]
#[command(
    name = "emcl",
    version,
    about = "EM subspace projection experiments on paired embeddings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reconstruct a stacked video/text batch in a rank-K subspace
    RunEmcl(RunEmclArgs),
    /// Trace class variances over EM iterations on synthetic data
    SynthExperiment(SynthArgs),
    /// Recall@K and median rank in both retrieval directions
    EvalRetrieval(EvalArgs),
    /// Fit a diagonal GMM and write its log-likelihood trace
    GmmCheck(GmmArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run config, or a manifest from an earlier run
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmclFlags {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of subspaces
    #[arg(long)]
    pub k: Option<usize>,
    /// Routing iterations
    #[arg(long)]
    pub iters: Option<usize>,
    /// Attention temperature
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Momentum of the initial-value state
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weight of the reconstruction in the residual blend
    #[arg(long)]
    pub beta: Option<f64>,
}

impl EmclFlags {
    pub fn section(&self) -> EmclSection {
        EmclSection {
            k: self.k,
            iters: self.iters,
            sigma: self.sigma,
            alpha: self.alpha,
            beta: self.beta,
            kernel: None,
            seed: self.seed,
            epsilon: None,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunEmclArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub emcl: EmclFlags,
    /// Stacked batch, video rows first
    #[arg(long, conflicts_with_all = ["videos", "texts"])]
    pub input: Option<PathBuf>,
    /// Video rows at the top of --input (default: half)
    #[arg(long, requires = "input")]
    pub video_rows: Option<usize>,
    #[arg(long, requires = "texts")]
    pub videos: Option<PathBuf>,
    #[arg(long, requires = "videos")]
    pub texts: Option<PathBuf>,
    /// Initial-value state from an earlier run
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Keep the initial-value state fixed
    #[arg(long)]
    pub frozen: bool,
    /// Write EMB1B instead of text
    #[arg(long)]
    pub binary: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Seeds both the generator and the EM initialization
    #[command(flatten)]
    pub emcl: EmclFlags,
    /// Rank of the PCA comparator
    #[arg(long)]
    pub pca_k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub emcl_flags: EmclFlags,
    #[arg(long)]
    pub videos: Option<PathBuf>,
    #[arg(long)]
    pub texts: Option<PathBuf>,
    /// Video index per text query, one per line
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    #[arg(long)]
    pub inverted_softmax: bool,
    #[arg(long)]
    pub inv_temperature: Option<f64>,
    /// Contrastive temperature of the reported loss
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Also evaluate the EM reconstruction
    #[arg(long)]
    pub emcl: bool,
    /// Initial-value state for the reconstruction; used frozen
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Recall cut-offs to print, e.g. 1,5,50
    #[arg(long, value_delimiter = ',')]
    pub recall_ks: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct GmmArgs {
    #[command(flatten)]
    pub common: Common,
    /// Samples as an embedding file, one per row
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmidict::labeldist::Aggregation;
use mmidict::recognize::Scheme;
use mmidict::select::{Method, PriorMode};
use mmidict::KernelParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "mmidict",
    version,
    about = "Sparse dictionary attributes by information maximization",
    args_conflicts_with_subcommands = true
)]
pub struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true, env = "MMIDICT_THREADS")]
    pub threads: Option<usize>,

    /// Re-run the invocation recorded in a run_config.json.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// With --config, write outputs here instead of the recorded directory.
    #[arg(long, requires = "config")]
    pub into: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Clone, Debug, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "subcommand")]
pub enum Command {
    /// Learn an initial dictionary with K-SVD.
    Train(TrainArgs),
    /// Compress a dictionary to k atoms.
    Select(SelectArgs),
    /// Sparse-code features against a dictionary.
    Encode(EncodeArgs),
    /// Recognize sequences with k-NN over DTW or code histograms.
    Classify(ClassifyArgs),
    /// Pick representative frames of every sequence.
    Summarize(SummarizeArgs),
    /// Purity and compactness histograms of a dictionary.
    Eval(EvalArgs),
    /// Write a synthetic feature file.
    Gen(GenArgs),
}

impl Command {
    pub fn out_mut(&mut self) -> &mut PathBuf {
        match self {
            Command::Train(a) => &mut a.out,
            Command::Select(a) => &mut a.out,
            Command::Encode(a) => &mut a.out,
            Command::Classify(a) => &mut a.out,
            Command::Summarize(a) => &mut a.out,
            Command::Eval(a) => &mut a.out,
            Command::Gen(a) => &mut a.out,
        }
    }
}

#[derive(Clone, Copy, Debug, Args, Serialize, Deserialize)]
pub struct KernelArgs {
    /// Covariances below this magnitude leave the sparse support.
    #[arg(long, default_value_t = 1e-6)]
    pub threshold: f64,
    /// Diagonal jitter added to the kernel.
    #[arg(long, default_value_t = 1e-8)]
    pub jitter: f64,
}

impl KernelArgs {
    pub fn params(self) -> KernelParams {
        KernelParams {
            threshold: self.threshold,
            jitter: self.jitter,
        }
    }
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Dictionary size K.
    #[arg(long)]
    pub atoms: usize,
    /// Sparsity bound T.
    #[arg(long)]
    pub sparsity: usize,
    #[arg(long, default_value_t = 20)]
    pub iters: usize,
    /// Stop when an iteration improves the RMSE by less than this.
    #[arg(long, default_value_t = 1e-6)]
    pub min_improvement: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Coefficient pooling for the per-atom class distributions.
    #[arg(long, value_enum, default_value_t = AggArg::Abs)]
    pub agg: AggArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SelectArgs {
    #[arg(long)]
    pub dict: PathBuf,
    /// Codes of the training features against --dict.
    #[arg(long)]
    pub codes: PathBuf,
    /// Training features (signal keys and labels).
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Target size k.
    #[arg(long)]
    pub k: usize,
    /// Label weight for mmi2; estimated when absent.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum, default_value_t = AggArg::Abs)]
    pub agg: AggArg,
    /// Atom prior for mmi3.
    #[arg(long, value_enum, default_value_t = PriorArg::Mass)]
    pub prior: PriorArg,
    /// Evaluate greedy steps on the full kernel.
    #[arg(long)]
    pub dense: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    /// Seed for k-means.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Record per-step wall time in the trace (breaks byte-identical reruns).
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct EncodeArgs {
    #[arg(long)]
    pub dict: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub sparsity: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub dict: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    /// Test features; omit with --by-group.
    #[arg(long, required_unless_present = "by_group", conflicts_with = "by_group")]
    pub test: Option<PathBuf>,
    /// Leave-one-group-out over --train using its group column.
    #[arg(long)]
    pub by_group: bool,
    #[arg(long, value_enum, default_value_t = SchemeArg::Dtw)]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = 1)]
    pub knn: usize,
    #[arg(long)]
    pub sparsity: usize,
    /// Run DTW on absolute code values.
    #[arg(long)]
    pub dtw_abs: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Frames per summary.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Keep raw frame magnitudes in the Gram kernel.
    #[arg(long)]
    pub no_normalize: bool,
    /// Use the thresholded kernel support instead of the full kernel.
    #[arg(long)]
    pub sparse: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub dict: PathBuf,
    /// Codes of --features against --dict.
    #[arg(long)]
    pub codes: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, value_enum, default_value_t = AggArg::Abs)]
    pub agg: AggArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: GenKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Planted frame sets to emit for `clusters`.
    #[arg(long, default_value_t = 1)]
    pub sequences: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggArg {
    Abs,
    Signed,
    Count,
}

impl From<AggArg> for Aggregation {
    fn from(a: AggArg) -> Self {
        match a {
            AggArg::Abs => Aggregation::Abs,
            AggArg::Signed => Aggregation::Signed,
            AggArg::Count => Aggregation::Count,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorArg {
    Mass,
    Uniform,
}

impl From<PriorArg> for PriorMode {
    fn from(p: PriorArg) -> Self {
        match p {
            PriorArg::Mass => PriorMode::Mass,
            PriorArg::Uniform => PriorMode::Uniform,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Me,
    Mmi1,
    Mmi2,
    Mmi3,
    Kmeans,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Me => Method::Me,
            MethodArg::Mmi1 => Method::Mmi1,
            MethodArg::Mmi2 => Method::Mmi2,
            MethodArg::Mmi3 => Method::Mmi3,
            MethodArg::Kmeans => Method::Kmeans,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeArg {
    Dtw,
    Hist,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Dtw => Scheme::Dtw,
            SchemeArg::Hist => Scheme::Histogram,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenKind {
    /// Labeled single-frame attribute mixture, 4 classes.
    Mixture,
    /// Labeled action-like sequences grouped by actor.
    Actions,
    /// Unlabeled frame sets around planted clusters.
    Clusters,
}

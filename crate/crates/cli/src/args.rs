use std::fmt::Display;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use garec_core::contrastive::Objective;
use garec_core::corpus::{GtPolicy, Split};
use garec_core::metrics::ZscoreScope;
use garec_core::retrieval::{Method, Task};
use serde::{Serialize, Serializer};

fn shown<S: Serializer, T: Display>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn shown_debug<S: Serializer, T: std::fmt::Debug>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(&format_args!("{v:?}"))
}

/// Graphical-abstract recommendation experiments: ingest a corpus, score
/// candidates, evaluate rankings and train a linear adapter.
#[derive(Debug, Parser, Serialize)]
#[command(name = "garec", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalOpts {
    /// Confidence threshold fractions for CAR; several values run a sweep.
    #[arg(long, global = true, value_delimiter = ',', default_value = "0.5")]
    pub alpha: Vec<f64>,
    /// Recall cutoffs.
    #[arg(long, global = true, value_delimiter = ',', default_value = "1,5,10")]
    pub k: Vec<usize>,
    /// Contrastive temperature.
    #[arg(long, global = true, default_value_t = 0.07)]
    pub tau: f64,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Validate a corpus and write it in canonical line-per-record form.
    Ingest(IngestArgs),
    /// Rank candidates for every query paper and dump the score matrix.
    Score(ScoreArgs),
    /// Compute metrics from a score matrix.
    Eval(EvalArgs),
    /// Train a linear adapter on frozen embeddings.
    Train(TrainArgs),
    /// Corpus statistics as JSON.
    Stats(StatsArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    #[serde(serialize_with = "shown")]
    pub task: Task,
    #[arg(long)]
    #[serde(serialize_with = "shown")]
    pub method: Method,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Adapter file written by `train`, applied to image vectors.
    #[arg(long)]
    pub adapter: Option<PathBuf>,
    /// Split whose papers act as queries.
    #[arg(long, default_value = "test")]
    #[serde(serialize_with = "shown")]
    pub query_split: Split,
    /// Split whose graphical abstracts form the inter candidate pool.
    #[arg(long, default_value = "train")]
    #[serde(serialize_with = "shown")]
    pub reference_split: Split,
    #[arg(long, default_value = "ga-only")]
    pub gt_policy: GtPolicy,
    /// Score captions of the figure only, ignoring subfigure captions.
    #[arg(long)]
    pub no_subfigure_captions: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    #[serde(serialize_with = "shown")]
    pub task: Task,
    #[arg(long)]
    pub scores: PathBuf,
    /// Corpus supplying ground truth (intra) and categories (inter).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Needed for inter: abstract and GA embeddings.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub car_k: usize,
    #[arg(long, default_value_t = 5)]
    pub ndcg_k: usize,
    /// Cutoff for the inter metrics.
    #[arg(long, default_value_t = 5)]
    pub inter_k: usize,
    #[arg(long, default_value = "topk")]
    #[serde(serialize_with = "shown_debug")]
    pub zscore_scope: ZscoreScope,
    #[arg(long, default_value = "ga-only")]
    pub gt_policy: GtPolicy,
    #[arg(long, default_value_t = garec_core::inter_metrics::DEFAULT_CLIP_WEIGHT)]
    pub clip_weight: f64,
    /// Keep negative GA-to-GA similarities instead of clamping them at 0.
    #[arg(long)]
    pub no_clip_clamp: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value = "intra")]
    #[serde(serialize_with = "shown_debug")]
    pub objective: Objective,
    /// Fuse figure and caption embeddings by Hadamard product.
    #[arg(long)]
    pub fusion: bool,
    /// Non-GA figures per paper.
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lr: f64,
    #[arg(long, default_value_t = 1024)]
    pub eval_papers: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    #[serde(serialize_with = "opt_shown")]
    pub split: Option<Split>,
    /// Write here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn opt_shown<S: Serializer>(v: &Option<Split>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => s.collect_str(x),
        None => s.serialize_none(),
    }
}

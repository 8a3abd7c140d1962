//! Intra-task evaluation: CAR@k, recall, MRR, nDCG and their aggregation.
//!
//! Probabilities come from a z-scored softmax over the top-k raw scores;
//! logarithms are natural.

mod car;
mod ranking;
mod report;

use thiserror::Error;

pub use car::{
    car_at_k, confidence, entropy, softmax, softmax_z, zscores, CarBreakdown, CarConfig,
    ZscoreScope,
};
pub use ranking::{first_gt_rank, mrr, ndcg_at_k, recall_at_k};
pub use report::{
    aggregate_intra, car_histogram, evaluate_intra_query, HistogramBin, IntraAggregate,
    IntraMetricReport, IntraRow, HISTOGRAM_BINS,
};

/// Entropy threshold fraction used when none is configured.
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("empty ground-truth set")]
    EmptyGt,
    #[error("no scored candidates")]
    EmptyList,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("alpha must lie in [0, 1], got {0}")]
    Alpha(f64),
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("not a probability distribution")]
    InvalidDistribution,
    #[error("expected {expected} probabilities, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("nothing to aggregate")]
    NoRows,
    #[error("rows were evaluated with different cutoffs")]
    MixedRows,
    #[error("paper `{0}` has no known category")]
    UnknownCategory(String),
    #[error("missing embedding `{0}`")]
    MissingEmbedding(String),
    #[error("zero-norm embedding `{0}`")]
    ZeroNorm(String),
    #[error(transparent)]
    Vector(#[from] crate::embed_store::VectorError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

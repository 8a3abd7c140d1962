//! Contrastive objectives over frozen embeddings and a linear-adapter
//! trainer.
//!
//! Similarities are cosines; padded negatives are masked out of the
//! denominator rather than scored.

mod adapter;
mod loss;
mod train;

use thiserror::Error;

use crate::embed_store::{StoreError, VectorError};

pub use adapter::LinearAdapter;
pub use loss::{
    batch_loss, info_nce, info_nce_grad, info_nce_term_grad, loss_inter, loss_inter_fused,
    loss_inter_grad, loss_intra, loss_intra_fused, unfuse_grad, BatchGradient, InterGradient,
    LossBatch, TermGradient,
};
pub use train::{evaluation_batch, train_adapter, Objective, TrainConfig, TrainOutcome};

/// Temperature used when none is configured.
pub const DEFAULT_TAU: f64 = 0.07;

#[derive(Debug, Error)]
pub enum ContrastiveError {
    #[error("temperature must be positive and finite, got {0}")]
    Temperature(f64),
    #[error("zero-norm vector: {0}")]
    ZeroNorm(String),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("cross-paper objective needs at least 2 papers per batch, got {0}")]
    BatchTooSmall(usize),
    #[error("no training papers with a graphical abstract")]
    EmptyTrainSplit,
    #[error("missing embedding `{0}`")]
    MissingEmbedding(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

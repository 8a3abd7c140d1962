//! Graphical-abstract recommendation toolkit.
//!
//! Ranks a paper's figures (intra) or other papers' graphical abstracts
//! (inter) against its abstract, and evaluates the rankings with recall,
//! MRR, nDCG and the confidence-adjusted top-1 ratio (CAR@k). Embeddings are
//! external inputs; the contrastive objectives can train a linear adapter
//! on top of them.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the bottom of this file fix the common `f64` instantiations.

pub mod contrastive;
pub mod corpus;
pub mod embed_store;
pub mod inter_metrics;
pub mod lexical;
pub mod metrics;
pub mod retrieval;
pub mod scalar;

pub use scalar::Scalar;

pub type RankedList64 = retrieval::RankedList<f64>;
pub type CarBreakdown64 = metrics::CarBreakdown<f64>;
pub type IntraRow64 = metrics::IntraRow<f64>;
pub type IntraMetricReport64 = metrics::IntraMetricReport<f64>;
pub type InterRow64 = inter_metrics::InterRow<f64>;
pub type InterMetricReport64 = inter_metrics::InterMetricReport<f64>;
pub type LossBatch64 = contrastive::LossBatch<f64>;
pub type LinearAdapter64 = contrastive::LinearAdapter<f64>;
pub type CarBreakdown32 = metrics::CarBreakdown<f32>;
pub type LossBatch32 = contrastive::LossBatch<f32>;

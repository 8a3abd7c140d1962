//! Command-line front end: argument definitions, run manifests and the
//! mapping from failures to exit codes.

pub mod args;
mod commands;
pub mod manifest;

use std::fmt;

use garec_core::contrastive::ContrastiveError;
use garec_core::corpus::CorpusError;
use garec_core::embed_store::StoreError;
use garec_core::metrics::MetricError;
use garec_core::retrieval::RetrievalError;

pub use commands::{alpha_dir, run};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INVALID_INPUT: i32 = 2;
pub const EXIT_MISSING_EMBEDDING: i32 = 3;

/// Bad flags or flag combinations that clap cannot catch on its own.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn contrastive_code(e: &ContrastiveError) -> i32 {
    match e {
        ContrastiveError::MissingEmbedding(_) => EXIT_MISSING_EMBEDDING,
        _ => EXIT_INVALID_INPUT,
    }
}

/// Exit code for a failed run, from the first recognised cause.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<Usage>() || cause.is::<CorpusError>() || cause.is::<StoreError>() {
            return EXIT_INVALID_INPUT;
        }
        if let Some(e) = cause.downcast_ref::<RetrievalError>() {
            return match e {
                RetrievalError::MissingEmbedding(_) => EXIT_MISSING_EMBEDDING,
                RetrievalError::Adapter(c) => contrastive_code(c),
                RetrievalError::Io(_) => EXIT_INTERNAL,
                _ => EXIT_INVALID_INPUT,
            };
        }
        if let Some(e) = cause.downcast_ref::<MetricError>() {
            return match e {
                MetricError::MissingEmbedding(_) => EXIT_MISSING_EMBEDDING,
                MetricError::Io(_) => EXIT_INTERNAL,
                _ => EXIT_INVALID_INPUT,
            };
        }
        if let Some(e) = cause.downcast_ref::<ContrastiveError>() {
            return contrastive_code(e);
        }
        if let Some(e) = cause.downcast_ref::<std::io::Error>() {
            if e.kind() == std::io::ErrorKind::NotFound {
                return EXIT_INVALID_INPUT;
            }
        }
    }
    EXIT_INTERNAL
}

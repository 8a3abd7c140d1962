//! Fixed-dimension embedding vectors keyed by entity, plus the vector
//! operations used for relevance scoring.
//!
//! Vectors are kept exactly as they were written (`f32`, not normalized).
//! Zero vectors are accepted at load time and rejected where a cosine is
//! actually taken.

mod format;
mod vector;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use thiserror::Error;

use crate::scalar::Scalar;

pub use format::{MAGIC, VERSION};
pub use vector::{cosine, dot, fuse_hadamard, norm, VectorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityKind {
    Abstract,
    Figure,
    Subfigure,
    Caption,
    Ga,
    Adapter,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Abstract => "abstract",
            EntityKind::Figure => "figure",
            EntityKind::Subfigure => "subfigure",
            EntityKind::Caption => "caption",
            EntityKind::Ga => "ga",
            EntityKind::Adapter => "adapter",
        }
    }
}

impl FromStr for EntityKind {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "abstract" => EntityKind::Abstract,
            "figure" => EntityKind::Figure,
            "subfigure" => EntityKind::Subfigure,
            "caption" => EntityKind::Caption,
            "ga" => EntityKind::Ga,
            "adapter" => EntityKind::Adapter,
            other => return Err(StoreError::BadKey(format!("unknown kind `{other}`"))),
        })
    }
}

/// `kind:id`, where `id` is `paper`, `paper/figure` or `paper/figure/subfigure`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityKey {
    pub kind: EntityKind,
    pub id: String,
}

impl EntityKey {
    pub fn new(kind: EntityKind, id: impl Into<String>) -> Self {
        Self {
            kind,
            id: id.into(),
        }
    }

    pub fn abstract_of(paper: &str) -> Self {
        Self::new(EntityKind::Abstract, paper)
    }

    pub fn ga_of(paper: &str) -> Self {
        Self::new(EntityKind::Ga, paper)
    }

    pub fn figure(paper: &str, figure: &str) -> Self {
        Self::new(EntityKind::Figure, format!("{paper}/{figure}"))
    }

    pub fn subfigure(paper: &str, figure: &str, sub: &str) -> Self {
        Self::new(EntityKind::Subfigure, format!("{paper}/{figure}/{sub}"))
    }

    pub fn figure_caption(paper: &str, figure: &str) -> Self {
        Self::new(EntityKind::Caption, format!("{paper}/{figure}"))
    }

    pub fn subfigure_caption(paper: &str, figure: &str, sub: &str) -> Self {
        Self::new(EntityKind::Caption, format!("{paper}/{figure}/{sub}"))
    }

    pub fn adapter_row(row: usize) -> Self {
        Self::new(EntityKind::Adapter, format!("row:{row}"))
    }
}

impl fmt::Display for EntityKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.as_str(), self.id)
    }
}

impl FromStr for EntityKey {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, id) = s
            .split_once(':')
            .ok_or_else(|| StoreError::BadKey(format!("`{s}` has no `kind:` prefix")))?;
        let kind: EntityKind = kind.parse()?;
        if id.is_empty() || id.split('/').any(str::is_empty) {
            return Err(StoreError::BadKey(format!(
                "`{s}` has an empty id component"
            )));
        }
        Ok(Self::new(kind, id))
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes {0:?}, expected \"SGEM\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("record `{key}`: expected {expected} components, found {found}")]
    DimMismatch {
        key: String,
        expected: usize,
        found: usize,
    },
    #[error("record `{key}`: component {index} is not finite")]
    NonFinite { key: String, index: usize },
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("bad key: {0}")]
    BadKey(String),
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("line {line}: {message}")]
    Text { line: usize, message: String },
}

/// Read-only map from entity key to a `dim`-component vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    entries: IndexMap<EntityKey, Vec<f32>>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Result<Self, StoreError> {
        if dim == 0 {
            return Err(StoreError::ZeroDimension);
        }
        Ok(Self {
            dim,
            entries: IndexMap::new(),
        })
    }

    /// Adds a record, enforcing dimension, finiteness and key uniqueness.
    pub fn insert(&mut self, key: EntityKey, vector: Vec<f32>) -> Result<(), StoreError> {
        if vector.len() != self.dim {
            return Err(StoreError::DimMismatch {
                key: key.to_string(),
                expected: self.dim,
                found: vector.len(),
            });
        }
        if let Some(index) = vector.iter().position(|x| !x.is_finite()) {
            return Err(StoreError::NonFinite {
                key: key.to_string(),
                index,
            });
        }
        if self.entries.contains_key(&key) {
            return Err(StoreError::DuplicateKey(key.to_string()));
        }
        self.entries.insert(key, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &EntityKey) -> Option<&[f32]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    pub fn contains(&self, key: &EntityKey) -> bool {
        self.entries.contains_key(key)
    }

    /// The stored vector widened (or kept) to `T`.
    pub fn vector<T: Scalar>(&self, key: &EntityKey) -> Option<Vec<T>> {
        self.get(key).map(|v| {
            v.iter()
                .map(|&x| T::from_f32(x).expect("finite f32 converts"))
                .collect()
        })
    }

    /// Records in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&EntityKey, &[f32])> {
        self.entries.iter().map(|(k, v)| (k, v.as_slice()))
    }

    /// Loads either the binary format or, when the magic is absent, the
    /// tab-separated text fallback.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let bytes = std::fs::read(path)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        if bytes.starts_with(&MAGIC) {
            format::decode_binary(bytes)
        } else if looks_textual(bytes) {
            let text = std::str::from_utf8(bytes).map_err(|e| StoreError::Text {
                line: 0,
                message: e.to_string(),
            })?;
            format::decode_text(text)
        } else {
            let mut magic = [0u8; 4];
            let n = bytes.len().min(4);
            magic[..n].copy_from_slice(&bytes[..n]);
            Err(StoreError::BadMagic(magic))
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        format::encode_binary(self)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

fn looks_textual(bytes: &[u8]) -> bool {
    match std::str::from_utf8(bytes) {
        Ok(text) => text
            .lines()
            .find(|l| !l.trim().is_empty())
            .is_none_or(|l| l.contains('\t') && l.contains(':')),
        Err(_) => false,
    }
}

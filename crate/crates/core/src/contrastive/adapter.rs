use crate::embed_store::{EmbeddingStore, EntityKey, EntityKind, StoreError};
use crate::scalar::Scalar;

use super::ContrastiveError;

/// Dense `rows x cols` map applied to image-side embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearAdapter<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> LinearAdapter<T> {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![T::zero(); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = T::one();
        }
        Self {
            rows: dim,
            cols: dim,
            data,
        }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self, ContrastiveError> {
        let cols = rows.first().map_or(0, Vec::len);
        if cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(ContrastiveError::Shape(
                "adapter rows must be nonempty and equal length".into(),
            ));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(ContrastiveError::Shape(
                "adapter entries must be finite".into(),
            ));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn apply(&self, x: &[T]) -> Result<Vec<T>, ContrastiveError> {
        if x.len() != self.cols {
            return Err(ContrastiveError::Shape(format!(
                "adapter expects {} inputs, got {}",
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&w, &v)| w * v).sum())
            .collect())
    }

    /// Adds `scale * grad_out x^T`.
    pub(crate) fn add_outer(&mut self, scale: T, grad_out: &[T], x: &[T]) {
        for (i, &g) in grad_out.iter().enumerate() {
            let gs = g * scale;
            if gs == T::zero() {
                continue;
            }
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (w, &v) in row.iter_mut().zip(x) {
                *w += gs * v;
            }
        }
    }

    pub(crate) fn zeros_like(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: vec![T::zero(); self.data.len()],
        }
    }

    pub(crate) fn axpy(&mut self, scale: T, other: &Self) {
        for (w, &g) in self.data.iter_mut().zip(&other.data) {
            *w += scale * g;
        }
    }

    /// Stored as `adapter:row:<i>` records, one per output row.
    pub fn to_store(&self) -> EmbeddingStore {
        let mut store = EmbeddingStore::new(self.cols).expect("adapter has columns");
        for i in 0..self.rows {
            let row = self
                .row(i)
                .iter()
                .map(|x| x.to_f32().expect("finite adapter entry"))
                .collect();
            store
                .insert(EntityKey::adapter_row(i), row)
                .expect("fresh adapter rows are unique and finite");
        }
        store
    }

    pub fn from_store(store: &EmbeddingStore) -> Result<Self, ContrastiveError> {
        let n = store
            .iter()
            .filter(|(k, _)| k.kind == EntityKind::Adapter)
            .count();
        let rows = (0..n)
            .map(|i| {
                let key = EntityKey::adapter_row(i);
                store.vector::<T>(&key).ok_or_else(|| {
                    ContrastiveError::Store(StoreError::BadKey(format!("missing `{key}`")))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_rows(rows)
    }
}

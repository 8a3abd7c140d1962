use std::collections::{BTreeSet, HashMap};

use super::TokenSeq;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

/// Document-frequency table and average length over one scoring pool.
#[derive(Debug, Clone, PartialEq)]
pub struct Bm25Index {
    n_docs: usize,
    avgdl: f64,
    df: HashMap<String, usize>,
    k1: f64,
    b: f64,
}

impl Bm25Index {
    pub fn build<'a>(pool: impl IntoIterator<Item = &'a TokenSeq>) -> Self {
        let mut n_docs = 0;
        let mut total = 0;
        let mut df = HashMap::new();
        for doc in pool {
            n_docs += 1;
            total += doc.len();
            let uniq: BTreeSet<&String> = doc.tokens().iter().collect();
            for t in uniq {
                *df.entry(t.clone()).or_insert(0) += 1;
            }
        }
        let avgdl = if n_docs == 0 {
            0.0
        } else {
            total as f64 / n_docs as f64
        };
        Self {
            n_docs,
            avgdl,
            df,
            k1: BM25_K1,
            b: BM25_B,
        }
    }

    pub fn with_params(mut self, k1: f64, b: f64) -> Self {
        self.k1 = k1;
        self.b = b;
        self
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.n_docs as f64;
        let df = self.df.get(term).copied().unwrap_or(0) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// Sum over distinct query terms of `idf * tf (k1 + 1) / (tf + k1 (1 - b + b |d| / avgdl))`.
    pub fn score(&self, query: &TokenSeq, doc: &TokenSeq) -> f64 {
        if query.is_empty() || doc.is_empty() {
            return 0.0;
        }
        let mut tf: HashMap<&str, usize> = HashMap::new();
        for t in doc.tokens() {
            *tf.entry(t.as_str()).or_insert(0) += 1;
        }
        let len_ratio = if self.avgdl > 0.0 {
            doc.len() as f64 / self.avgdl
        } else {
            1.0
        };
        let norm = self.k1 * (1.0 - self.b + self.b * len_ratio);
        let terms: BTreeSet<&str> = query.tokens().iter().map(String::as_str).collect();
        terms
            .into_iter()
            .map(|t| {
                let f = tf.get(t).copied().unwrap_or(0) as f64;
                if f == 0.0 {
                    0.0
                } else {
                    self.idf(t) * f * (self.k1 + 1.0) / (f + norm)
                }
            })
            .sum()
    }
}

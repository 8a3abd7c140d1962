use std::collections::{BTreeSet, HashMap};

use super::TokenSeq;

pub const CIDER_MAX_N: usize = 4;
pub const CIDER_SCALE: f64 = 10.0;

/// Per-order n-gram document frequencies over a reference caption set.
///
/// `idf(g) = ln(N) - ln(max(1, df(g)))`, so unseen n-grams get `ln(N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    n_docs: usize,
    df: [HashMap<String, usize>; CIDER_MAX_N],
    uniform: Option<f64>,
}

impl IdfTable {
    pub fn build<'a>(docs: impl IntoIterator<Item = &'a TokenSeq>) -> Self {
        let mut df: [HashMap<String, usize>; CIDER_MAX_N] = Default::default();
        let mut n_docs = 0;
        for doc in docs {
            n_docs += 1;
            for (n, table) in df.iter_mut().enumerate() {
                let uniq: BTreeSet<String> = doc.ngrams(n + 1).collect();
                for g in uniq {
                    *table.entry(g).or_insert(0) += 1;
                }
            }
        }
        Self {
            n_docs,
            df,
            uniform: None,
        }
    }

    /// Same weight for every n-gram.
    pub fn uniform(weight: f64) -> Self {
        Self {
            n_docs: 0,
            df: Default::default(),
            uniform: Some(weight),
        }
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// `n` is the order, 1-based.
    pub fn idf(&self, n: usize, gram: &str) -> f64 {
        if let Some(w) = self.uniform {
            return w;
        }
        if self.n_docs == 0 {
            return 0.0;
        }
        let df = self.df[n - 1].get(gram).copied().unwrap_or(0).max(1);
        (self.n_docs as f64).ln() - (df as f64).ln()
    }

    fn weighted(&self, seq: &TokenSeq, n: usize) -> HashMap<String, f64> {
        let mut counts: HashMap<String, f64> = HashMap::new();
        for g in seq.ngrams(n) {
            *counts.entry(g).or_insert(0.0) += 1.0;
        }
        counts
            .into_iter()
            .map(|(g, tf)| {
                let w = tf * self.idf(n, &g);
                (g, w)
            })
            .collect()
    }
}

fn sparse_cosine(a: &HashMap<String, f64>, b: &HashMap<String, f64>) -> f64 {
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().filter_map(|(g, x)| b.get(g).map(|y| x * y)).sum();
    dot / (na * nb)
}

/// Mean over orders 1..=4 of tf-idf cosine, times 10. No length penalty.
pub fn cider(candidate: &TokenSeq, reference: &TokenSeq, idf: &IdfTable) -> f64 {
    let total: f64 = (1..=CIDER_MAX_N)
        .map(|n| sparse_cosine(&idf.weighted(candidate, n), &idf.weighted(reference, n)))
        .sum();
    CIDER_SCALE * total / CIDER_MAX_N as f64
}

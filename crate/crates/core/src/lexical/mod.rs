//! Caption-to-abstract lexical relevance: ROUGE-L, BM25 and CIDEr.
//!
//! All scorers take pre-normalized token sequences and return `f64`.

mod bm25;
mod cider;
mod rouge;

pub use bm25::{Bm25Index, BM25_B, BM25_K1};
pub use cider::{cider, IdfTable, CIDER_MAX_N, CIDER_SCALE};
pub use rouge::{lcs_len, rouge_l, ROUGE_BETA};

/// Lowercased word tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Contiguous `n`-grams joined by a single space.
    pub fn ngrams(&self, n: usize) -> impl Iterator<Item = String> + '_ {
        self.0.windows(n.max(1)).map(|w| w.join(" "))
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSeq {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSeq(iter.into_iter().map(Into::into).collect())
    }
}

/// Lowercase, turn every non-alphanumeric character into a separator, split.
pub fn normalize(text: &str) -> TokenSeq {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Which lexical score a caption is ranked by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexicalMetric {
    RougeL,
    Bm25,
    Cider,
}

use std::collections::BTreeSet;

use crate::scalar::Scalar;

use super::RetrievalError;

/// Declared ordering rule, recorded alongside every ranking.
pub const TIE_BREAK: &str = "score-desc,insertion-asc";

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry<T> {
    pub candidate_id: String,
    /// `None` marks a candidate that could not be scored; it ranks last.
    pub score: Option<T>,
    /// Position in the candidate set, used only to break ties.
    pub insertion: usize,
}

/// Candidates in descending score order, unscored ones at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList<T> {
    pub query_id: String,
    pub method: String,
    entries: Vec<RankedEntry<T>>,
    scored: usize,
}

impl<T: Scalar> RankedList<T> {
    /// Sorts `(candidate_id, score)` pairs given in insertion order.
    pub fn from_scores(
        query_id: impl Into<String>,
        method: impl Into<String>,
        scores: Vec<(String, Option<T>)>,
    ) -> Result<Self, RetrievalError> {
        let query_id = query_id.into();
        let mut seen = BTreeSet::new();
        let mut entries = Vec::with_capacity(scores.len());
        for (insertion, (candidate_id, score)) in scores.into_iter().enumerate() {
            if score.is_some_and(|s| !s.is_finite()) {
                return Err(RetrievalError::NonFiniteScore {
                    query: query_id.clone(),
                    candidate: candidate_id,
                });
            }
            if !seen.insert(candidate_id.clone()) {
                return Err(RetrievalError::DuplicateCandidate {
                    query: query_id.clone(),
                    candidate: candidate_id,
                });
            }
            entries.push(RankedEntry {
                candidate_id,
                score,
                insertion,
            });
        }
        entries.sort_by(|a, b| match (a.score, b.score) {
            (Some(x), Some(y)) => y
                .partial_cmp(&x)
                .expect("finite scores")
                .then(a.insertion.cmp(&b.insertion)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.insertion.cmp(&b.insertion),
        });
        let scored = entries.iter().take_while(|e| e.score.is_some()).count();
        Ok(Self {
            query_id,
            method: method.into(),
            entries,
            scored,
        })
    }

    pub fn entries(&self) -> &[RankedEntry<T>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of entries that carry a score; they form a prefix.
    pub fn scored_len(&self) -> usize {
        self.scored
    }

    pub fn unscored_len(&self) -> usize {
        self.entries.len() - self.scored
    }

    /// Entries that carry a score, best first.
    pub fn scored(&self) -> &[RankedEntry<T>] {
        &self.entries[..self.scored]
    }

    /// Scores of the scored prefix, best first.
    pub fn scores(&self) -> Vec<T> {
        self.scored().iter().filter_map(|e| e.score).collect()
    }

    /// 1-based rank of `candidate_id` within the whole list.
    pub fn rank_of(&self, candidate_id: &str) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.candidate_id == candidate_id)
            .map(|i| i + 1)
    }

    /// First `min(k, len)` entries.
    pub fn top_k(&self, k: usize) -> Self {
        let n = k.min(self.entries.len());
        Self {
            query_id: self.query_id.clone(),
            method: self.method.clone(),
            entries: self.entries[..n].to_vec(),
            scored: self.scored.min(n),
        }
    }

    /// Same ordering with every score mapped through `f`. Used for
    /// invariance checks; `f` must be strictly increasing.
    pub fn map_scores(&self, f: impl Fn(T) -> T) -> Result<Self, RetrievalError> {
        let mut by_insertion: Vec<&RankedEntry<T>> = self.entries.iter().collect();
        by_insertion.sort_by_key(|e| e.insertion);
        Self::from_scores(
            self.query_id.clone(),
            self.method.clone(),
            by_insertion
                .into_iter()
                .map(|e| (e.candidate_id.clone(), e.score.map(&f)))
                .collect(),
        )
    }
}

//! Binary-relevance ranking metrics. Only the scored prefix of a list
//! counts as retrieved; unscored candidates never earn credit.

use std::collections::BTreeSet;

use crate::retrieval::RankedList;
use crate::scalar::{count, Scalar};

use super::MetricError;

/// 1-based rank of the best-ranked ground truth among scored entries.
pub fn first_gt_rank<T: Scalar>(
    list: &RankedList<T>,
    gt_ids: &BTreeSet<String>,
) -> Result<Option<usize>, MetricError> {
    if gt_ids.is_empty() {
        return Err(MetricError::EmptyGt);
    }
    Ok(list
        .scored()
        .iter()
        .position(|e| gt_ids.contains(&e.candidate_id))
        .map(|i| i + 1))
}

/// 1 if any ground truth is within the first `k`, else 0.
pub fn recall_at_k<T: Scalar>(
    list: &RankedList<T>,
    gt_ids: &BTreeSet<String>,
    k: usize,
) -> Result<T, MetricError> {
    Ok(match first_gt_rank(list, gt_ids)? {
        Some(r) if r <= k => T::one(),
        _ => T::zero(),
    })
}

/// Reciprocal rank of the best-ranked ground truth, 0 if none is ranked.
pub fn mrr<T: Scalar>(list: &RankedList<T>, gt_ids: &BTreeSet<String>) -> Result<T, MetricError> {
    Ok(match first_gt_rank(list, gt_ids)? {
        Some(r) => T::one() / count::<T>(r),
        None => T::zero(),
    })
}

fn gain<T: Scalar>(rank: usize) -> T {
    T::one() / count::<T>(rank + 1).log2()
}

/// DCG over the first `k` with gain `1/log2(rank+1)`, over the DCG of
/// `min(|gt|, k)` ground truths placed first.
pub fn ndcg_at_k<T: Scalar>(
    list: &RankedList<T>,
    gt_ids: &BTreeSet<String>,
    k: usize,
) -> Result<T, MetricError> {
    if gt_ids.is_empty() {
        return Err(MetricError::EmptyGt);
    }
    if k == 0 {
        return Err(MetricError::ZeroK);
    }
    let dcg: T = list
        .scored()
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, e)| gt_ids.contains(&e.candidate_id))
        .map(|(i, _)| gain::<T>(i + 1))
        .sum();
    let ideal: T = (1..=gt_ids.len().min(k)).map(gain::<T>).sum();
    Ok(dcg / ideal)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn list(n: usize) -> RankedList<f64> {
        RankedList::from_scores(
            "q",
            "t",
            (0..n)
                .map(|i| (format!("c{i}"), Some(-(i as f64))))
                .collect(),
        )
        .unwrap()
    }

    fn gt(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn recall_and_mrr() {
        let l = list(8);
        assert_eq!(recall_at_k(&l, &gt(&["c0"]), 1).unwrap(), 1.0);
        assert_eq!(recall_at_k(&l, &gt(&["c5"]), 5).unwrap(), 0.0);
        assert_eq!(mrr(&l, &gt(&["c2"])).unwrap(), 1.0 / 3.0);
        assert_eq!(mrr(&l, &gt(&["c3", "c1"])).unwrap(), 0.5);
        assert_eq!(mrr(&l, &gt(&["zz"])).unwrap(), 0.0);
        assert!(mrr(&l, &gt(&[])).is_err());
    }

    #[test]
    fn ndcg_values() {
        let l = list(6);
        assert_eq!(ndcg_at_k(&l, &gt(&["c0"]), 5).unwrap(), 1.0);
        // tests/oracles/metrics_oracle.py
        assert_relative_eq!(
            ndcg_at_k(&l, &gt(&["c1"]), 5).unwrap(),
            0.63092975357145744,
            max_relative = 1e-12
        );
        assert_eq!(ndcg_at_k(&l, &gt(&["c5"]), 5).unwrap(), 0.0);
        assert_eq!(ndcg_at_k(&l, &gt(&["c0", "c1", "c2"]), 5).unwrap(), 1.0);
        assert_eq!(ndcg_at_k(&l, &gt(&["c0", "c1", "c2"]), 2).unwrap(), 1.0);
    }

    #[test]
    fn unscored_gt_earns_nothing() {
        let l = RankedList::<f64>::from_scores(
            "q",
            "t",
            vec![("a".into(), Some(1.0)), ("b".into(), None)],
        )
        .unwrap();
        assert_eq!(recall_at_k(&l, &gt(&["b"]), 5).unwrap(), 0.0);
        assert_eq!(mrr(&l, &gt(&["b"])).unwrap(), 0.0);
    }
}

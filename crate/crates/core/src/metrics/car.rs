use std::collections::BTreeSet;
use std::str::FromStr;

use serde::Serialize;

use crate::retrieval::RankedList;
use crate::scalar::{count, lit, Scalar};

use super::MetricError;

/// Which scores feed the mean and deviation of the z-score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ZscoreScope {
    /// Only the top-k scores being turned into probabilities.
    #[default]
    TopK,
    /// Every scored candidate; softmax still runs over the top k.
    Full,
}

impl FromStr for ZscoreScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "topk" => Ok(ZscoreScope::TopK),
            "full" => Ok(ZscoreScope::Full),
            other => Err(format!("unknown z-score scope `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarConfig<T> {
    pub k: usize,
    /// Entropy threshold as a fraction of the maximum entropy, in [0, 1].
    pub alpha: T,
    pub scope: ZscoreScope,
}

impl<T: Scalar> CarConfig<T> {
    pub fn new(k: usize, alpha: T) -> Result<Self, MetricError> {
        if k == 0 {
            return Err(MetricError::ZeroK);
        }
        if !(alpha >= T::zero() && alpha <= T::one()) {
            return Err(MetricError::Alpha(alpha.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(Self {
            k,
            alpha,
            scope: ZscoreScope::TopK,
        })
    }

    pub fn with_scope(mut self, scope: ZscoreScope) -> Self {
        self.scope = scope;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarBreakdown<T> {
    pub car: T,
    /// Probability of the best-ranked ground truth over the top-1
    /// probability; 0 when no ground truth made the top k.
    pub ratio: T,
    pub confidence: T,
    /// Natural-log entropy of `probabilities`.
    pub entropy: T,
    pub h: T,
    pub gt_in_top_k: bool,
    /// Number of candidates actually used, `min(k, scored)`.
    pub k_eff: usize,
    pub probabilities: Vec<T>,
}

fn check_finite<T: Scalar>(xs: &[T]) -> Result<(), MetricError> {
    match xs.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(MetricError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Population z-scores; all zero when the scores are all equal.
pub fn zscores<T: Scalar>(scores: &[T]) -> Result<Vec<T>, MetricError> {
    check_finite(scores)?;
    if scores.is_empty() {
        return Err(MetricError::EmptyList);
    }
    let first = scores[0];
    if scores.iter().all(|&s| s == first) {
        return Ok(vec![T::zero(); scores.len()]);
    }
    let n: T = count(scores.len());
    let mean = scores.iter().copied().sum::<T>() / n;
    let var = scores.iter().map(|&s| (s - mean) * (s - mean)).sum::<T>() / n;
    let std = var.sqrt();
    if std == T::zero() {
        return Ok(vec![T::zero(); scores.len()]);
    }
    Ok(scores.iter().map(|&s| (s - mean) / std).collect())
}

/// Max-shifted softmax.
pub fn softmax<T: Scalar>(z: &[T]) -> Result<Vec<T>, MetricError> {
    check_finite(z)?;
    let max = z
        .iter()
        .copied()
        .reduce(T::max)
        .ok_or(MetricError::EmptyList)?;
    let e: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: T = e.iter().copied().sum();
    Ok(e.into_iter().map(|v| v / total).collect())
}

/// z-score then softmax.
pub fn softmax_z<T: Scalar>(scores: &[T]) -> Result<Vec<T>, MetricError> {
    softmax(&zscores(scores)?)
}

fn check_distribution<T: Scalar>(p: &[T]) -> Result<(), MetricError> {
    if p.is_empty() {
        return Err(MetricError::EmptyList);
    }
    check_finite(p)?;
    let total: T = p.iter().copied().sum();
    let tol = 1e-9_f64.max(64.0 * T::epsilon().to_f64().unwrap_or(0.0) * p.len() as f64);
    let off = (total - T::one()).abs().to_f64().unwrap_or(f64::INFINITY);
    if p.iter().any(|&x| x < T::zero()) || off > tol {
        return Err(MetricError::InvalidDistribution);
    }
    Ok(())
}

/// Shannon entropy in nats, with 0 ln 0 = 0. A distribution whose entries
/// are all equal gets exactly ln k.
pub fn entropy<T: Scalar>(p: &[T]) -> Result<T, MetricError> {
    check_distribution(p)?;
    if p.iter().all(|&x| x == p[0]) {
        return Ok(count::<T>(p.len()).ln());
    }
    Ok(-p
        .iter()
        .filter(|&&x| x > T::zero())
        .map(|&x| x * x.ln())
        .sum::<T>())
}

/// `1 - max(0, (H - h) / (ln k - h)) / 2` with `h = alpha ln k`; 1 when the
/// denominator vanishes (alpha = 1 or k = 1).
pub fn confidence<T: Scalar>(p: &[T], k: usize, alpha: T) -> Result<T, MetricError> {
    if p.len() != k {
        return Err(MetricError::LengthMismatch {
            expected: k,
            found: p.len(),
        });
    }
    let h_val = entropy(p)?;
    Ok(confidence_from_entropy(h_val, k, alpha))
}

fn threshold<T: Scalar>(k: usize, alpha: T) -> (T, T) {
    let h_max = count::<T>(k).ln();
    (h_max, alpha * h_max)
}

fn confidence_from_entropy<T: Scalar>(entropy: T, k: usize, alpha: T) -> T {
    let (h_max, h) = threshold(k, alpha);
    let span = h_max - h;
    if entropy <= h || span <= T::zero() {
        return T::one();
    }
    let excess = ((entropy - h) / span).min(T::one());
    T::one() - lit::<T>(0.5) * excess
}

/// CAR@k over the scored prefix of `list`.
pub fn car_at_k<T: Scalar>(
    list: &RankedList<T>,
    gt_ids: &BTreeSet<String>,
    config: &CarConfig<T>,
) -> Result<CarBreakdown<T>, MetricError> {
    if gt_ids.is_empty() {
        return Err(MetricError::EmptyGt);
    }
    if config.k == 0 {
        return Err(MetricError::ZeroK);
    }
    let scored = list.scored();
    if scored.is_empty() {
        return Err(MetricError::EmptyList);
    }
    let k_eff = config.k.min(scored.len());
    let all = list.scores();
    let z = match config.scope {
        ZscoreScope::TopK => zscores(&all[..k_eff])?,
        ZscoreScope::Full => zscores(&all)?[..k_eff].to_vec(),
    };
    let probabilities = softmax(&z)?;
    let entropy = entropy(&probabilities)?;
    let (_, h) = threshold(k_eff, config.alpha);
    let confidence = confidence_from_entropy(entropy, k_eff, config.alpha);
    let gt_pos = scored[..k_eff]
        .iter()
        .position(|e| gt_ids.contains(&e.candidate_id));
    let (ratio, car) = match gt_pos {
        Some(i) => {
            let ratio = probabilities[i] / probabilities[0];
            (ratio, ratio * confidence)
        }
        None => (T::zero(), T::zero()),
    };
    Ok(CarBreakdown {
        car,
        ratio,
        confidence,
        entropy,
        h,
        gt_in_top_k: gt_pos.is_some(),
        k_eff,
        probabilities,
    })
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn list(scores: &[f64]) -> RankedList<f64> {
        RankedList::from_scores(
            "q",
            "t",
            scores
                .iter()
                .enumerate()
                .map(|(i, &s)| (format!("c{i}"), Some(s)))
                .collect(),
        )
        .unwrap()
    }

    fn gt(id: &str) -> BTreeSet<String> {
        BTreeSet::from([id.to_string()])
    }

    #[test]
    fn softmax_z_of_three() {
        // tests/oracles/metrics_oracle.py
        let p = softmax_z(&[3.0, 2.0, 1.0]).unwrap();
        let want = [
            0.72454827529479659,
            0.21289594404174723,
            0.062555780663456187,
        ];
        for (a, b) in p.iter().zip(want) {
            assert_relative_eq!(*a, b, max_relative = 1e-12);
        }
        assert_eq!(softmax_z(&[4.0, 4.0, 4.0]).unwrap(), vec![1.0 / 3.0; 3]);
        assert_eq!(softmax_z(&[-2.5]).unwrap(), vec![1.0]);
        assert!(softmax_z(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn entropy_values() {
        assert_relative_eq!(
            entropy(&[0.5, 0.25, 0.25]).unwrap(),
            1.039720770839918,
            max_relative = 1e-12
        );
        assert_eq!(entropy(&[0.25_f64; 4]).unwrap(), 4.0_f64.ln());
        assert_eq!(entropy(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(entropy(&[0.5, 0.6]).is_err());
        assert!(entropy(&[1.5, -0.5]).is_err());
    }

    #[test]
    fn confidence_values() {
        assert_relative_eq!(
            confidence(&[0.7, 0.2, 0.1], 3, 0.5).unwrap(),
            0.77015330083790247,
            max_relative = 1e-12
        );
        assert_eq!(confidence(&[1.0 / 3.0; 3], 3, 0.5).unwrap(), 0.5);
        assert_eq!(confidence(&[1.0, 0.0, 0.0], 3, 0.0).unwrap(), 1.0);
        assert_eq!(confidence(&[0.5, 0.5], 2, 1.0).unwrap(), 1.0);
        assert_eq!(confidence(&[1.0], 1, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn car_gt_second() {
        let b = car_at_k(
            &list(&[3.0, 2.0, 1.0, 0.5, 0.1]),
            &gt("c1"),
            &CarConfig::new(5, 0.5).unwrap(),
        )
        .unwrap();
        assert!(b.gt_in_top_k);
        assert_relative_eq!(b.ratio, 0.38700058998419512, max_relative = 1e-12);
        assert_relative_eq!(b.confidence, 0.7880299442513471, max_relative = 1e-12);
        assert_relative_eq!(b.car, 0.30496805335048372, max_relative = 1e-9);
        assert_relative_eq!(b.entropy, 1.145871600239702, max_relative = 1e-12);
    }

    #[test]
    fn car_boundaries() {
        let cfg = CarConfig::new(5, 0.5).unwrap();
        // z-scoring caps how peaked P can get: at k = 5 a single outlier is
        // the most confident input and still leaves C below 1
        // (tests/oracles/car_ceiling.py).
        let spike = car_at_k(&list(&[10.0, 0.0, 0.0, 0.0, 0.0]), &gt("c0"), &cfg).unwrap();
        assert_relative_eq!(spike.car, 0.93962935587784889, max_relative = 1e-12);
        let mut wide = vec![0.0; 10];
        wide[0] = 10.0;
        let confident =
            car_at_k(&list(&wide), &gt("c0"), &CarConfig::new(10, 0.5).unwrap()).unwrap();
        assert_eq!(confident.car, 1.0);
        let uniform = car_at_k(&list(&[1.0; 5]), &gt("c0"), &cfg).unwrap();
        assert_eq!(uniform.car, 0.5);
        assert_eq!(uniform.ratio, 1.0);
        let wrong = car_at_k(&list(&[10.0, 0.0, 0.0, 0.0, 0.0, -1.0]), &gt("c5"), &cfg).unwrap();
        assert_eq!(wrong.car, 0.0);
        assert!(!wrong.gt_in_top_k);
        assert!(wrong.confidence >= 0.5);
    }

    #[test]
    fn short_lists_use_k_eff() {
        let b = car_at_k(
            &list(&[2.0, 1.0]),
            &gt("c0"),
            &CarConfig::new(5, 0.5).unwrap(),
        )
        .unwrap();
        assert_eq!(b.k_eff, 2);
        assert_eq!(b.h, 0.5 * 2.0_f64.ln());
        let single = car_at_k(&list(&[2.0]), &gt("c0"), &CarConfig::new(5, 0.5).unwrap()).unwrap();
        assert_eq!(single.car, 1.0);
    }

    #[test]
    fn full_scope_differs_from_topk() {
        let l = list(&[3.0, 2.0, 1.0, -10.0, -20.0]);
        let top = car_at_k(&l, &gt("c1"), &CarConfig::new(3, 0.5).unwrap()).unwrap();
        let full = car_at_k(
            &l,
            &gt("c1"),
            &CarConfig::new(3, 0.5)
                .unwrap()
                .with_scope(ZscoreScope::Full),
        )
        .unwrap();
        assert_ne!(top.probabilities, full.probabilities);
        assert_relative_eq!(full.probabilities.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(CarConfig::new(0, 0.5).is_err());
        assert!(CarConfig::new(5, 1.5).is_err());
        assert!(car_at_k(
            &list(&[1.0]),
            &BTreeSet::new(),
            &CarConfig::new(1, 0.5).unwrap()
        )
        .is_err());
    }

    #[test]
    fn single_precision() {
        let l = RankedList::<f32>::from_scores(
            "q",
            "t",
            (0..5).map(|i| (format!("c{i}"), Some(1.0_f32))).collect(),
        )
        .unwrap();
        let b = car_at_k(&l, &gt("c0"), &CarConfig::new(5, 0.5_f32).unwrap()).unwrap();
        assert_eq!(b.car, 0.5_f32);
    }
}

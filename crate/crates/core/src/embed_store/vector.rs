use thiserror::Error;

use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VectorError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    /// `side` is 0 for the first argument, 1 for the second.
    #[error("zero-norm vector (argument {side})")]
    ZeroNorm { side: usize },
}

pub fn dot<T: Scalar>(u: &[T], v: &[T]) -> T {
    u.iter().zip(v).map(|(&a, &b)| a * b).sum()
}

pub fn norm<T: Scalar>(u: &[T]) -> T {
    dot(u, u).sqrt()
}

/// Cosine similarity `<u,v> / (|u| |v|)`, clamped to `[-1, 1]`.
///
/// Accumulates in `T`; callers holding `f32` storage widen to `f64` first.
pub fn cosine<T: Scalar>(u: &[T], v: &[T]) -> Result<T, VectorError> {
    if u.len() != v.len() {
        return Err(VectorError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let nu = norm(u);
    if nu == T::zero() {
        return Err(VectorError::ZeroNorm { side: 0 });
    }
    let nv = norm(v);
    if nv == T::zero() {
        return Err(VectorError::ZeroNorm { side: 1 });
    }
    let rho = dot(u, v) / (nu * nv);
    Ok(rho.max(lit(-1.0)).min(T::one()))
}

/// Componentwise product of a figure embedding with its caption embedding.
///
/// No normalization is applied here.
pub fn fuse_hadamard<T: Scalar>(figure: &[T], caption: &[T]) -> Result<Vec<T>, VectorError> {
    if figure.len() != caption.len() {
        return Err(VectorError::DimensionMismatch {
            left: figure.len(),
            right: caption.len(),
        });
    }
    Ok(figure.iter().zip(caption).map(|(&a, &b)| a * b).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_vectors_have_unit_cosine() {
        let u = [0.3, -1.2, 4.0];
        assert!((cosine(&u, &u).unwrap() - 1.0_f64).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_unit_vectors() {
        assert_eq!(cosine(&[1.0_f64, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn cosine_matches_scripted_value() {
        // 32 / (sqrt(14) * sqrt(77)), evaluated with mpmath at 30 digits
        let got = cosine(&[1.0_f64, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((got - 0.974_631_846_197_076_3).abs() < 1e-12);
    }

    #[test]
    fn zero_norm_is_an_error() {
        assert_eq!(
            cosine(&[0.0_f64, 0.0], &[1.0, 0.0]),
            Err(VectorError::ZeroNorm { side: 0 })
        );
        assert_eq!(
            cosine(&[1.0_f64, 0.0], &[0.0, 0.0]),
            Err(VectorError::ZeroNorm { side: 1 })
        );
    }

    #[test]
    fn cosine_works_in_single_precision() {
        let got: f32 = cosine(&[1.0_f32, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((got - 0.974_631_85).abs() < 1e-6);
    }

    #[test]
    fn hadamard_examples() {
        assert_eq!(
            fuse_hadamard(&[1.0, 2.0], &[3.0, 4.0]).unwrap(),
            vec![3.0, 8.0]
        );
        let fig = [0.5_f64, -2.0, 7.0];
        assert_eq!(fuse_hadamard(&fig, &[1.0; 3]).unwrap(), fig.to_vec());
        assert_eq!(fuse_hadamard(&[0.0; 3], &fig).unwrap(), vec![0.0; 3]);
        assert!(matches!(
            fuse_hadamard(&[1.0_f64], &[1.0, 2.0]),
            Err(VectorError::DimensionMismatch { .. })
        ));
    }

    fn nonzero_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0..10.0_f64, 6).prop_filter("nonzero", |v| norm(v) > 1e-3)
    }

    proptest! {
        #[test]
        fn cosine_symmetry_and_scale(u in nonzero_vec(), v in nonzero_vec(), a in 0.01..100.0_f64) {
            let c = cosine(&u, &v).unwrap();
            prop_assert!((-1.0..=1.0).contains(&c));
            prop_assert!((c - cosine(&v, &u).unwrap()).abs() < 1e-12);
            let scaled: Vec<f64> = u.iter().map(|x| a * x).collect();
            prop_assert!((c - cosine(&scaled, &v).unwrap()).abs() < 1e-12);
            let neg: Vec<f64> = u.iter().map(|x| -x).collect();
            prop_assert!((c + cosine(&neg, &v).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn hadamard_commutes_and_associates(u in nonzero_vec(), v in nonzero_vec(), w in nonzero_vec()) {
            prop_assert_eq!(fuse_hadamard(&u, &v).unwrap(), fuse_hadamard(&v, &u).unwrap());
            let left = fuse_hadamard(&fuse_hadamard(&u, &v).unwrap(), &w).unwrap();
            let right = fuse_hadamard(&u, &fuse_hadamard(&v, &w).unwrap()).unwrap();
            for (a, b) in left.iter().zip(&right) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }
}

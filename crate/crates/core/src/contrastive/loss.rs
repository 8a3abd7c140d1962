use crate::embed_store::{cosine, fuse_hadamard, norm, VectorError};
use crate::scalar::{count, lit, Scalar};

use super::ContrastiveError;

/// Query/positive/negative groups for a mean InfoNCE loss.
///
/// `masks[i][j]` is `true` when `negatives[i][j]` takes part; masked slots
/// are zero padding and contribute nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBatch<T> {
    pub queries: Vec<Vec<T>>,
    pub positives: Vec<Vec<T>>,
    pub negatives: Vec<Vec<Vec<T>>>,
    pub masks: Vec<Vec<bool>>,
    pub tau: T,
}

/// Gradient of the mean batch loss with respect to every input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchGradient<T> {
    pub loss: T,
    pub queries: Vec<Vec<T>>,
    pub positives: Vec<Vec<T>>,
    pub negatives: Vec<Vec<Vec<T>>>,
}

/// Loss and per-input gradients of one InfoNCE term.
#[derive(Debug, Clone, PartialEq)]
pub struct TermGradient<T> {
    pub loss: T,
    pub query: Vec<T>,
    pub positive: Vec<T>,
    pub negatives: Vec<Vec<T>>,
}

impl<T: Scalar> LossBatch<T> {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    fn check(&self) -> Result<(), ContrastiveError> {
        check_tau(self.tau)?;
        let n = self.queries.len();
        if self.positives.len() != n || self.negatives.len() != n || self.masks.len() != n {
            return Err(ContrastiveError::Shape(format!(
                "batch of {n} queries has {} positives, {} negative groups, {} masks",
                self.positives.len(),
                self.negatives.len(),
                self.masks.len()
            )));
        }
        for (i, (negs, mask)) in self.negatives.iter().zip(&self.masks).enumerate() {
            if negs.len() != mask.len() {
                return Err(ContrastiveError::Shape(format!(
                    "row {i}: {} negatives but mask of length {}",
                    negs.len(),
                    mask.len()
                )));
            }
        }
        if n == 0 {
            return Err(ContrastiveError::EmptyBatch);
        }
        Ok(())
    }

    /// Replaces each image-side vector by its Hadamard product with the
    /// matching caption vector. Masked slots are left untouched.
    pub fn fused(
        &self,
        positive_captions: &[Vec<T>],
        negative_captions: &[Vec<Vec<T>>],
    ) -> Result<Self, ContrastiveError> {
        self.check()?;
        if positive_captions.len() != self.len() || negative_captions.len() != self.len() {
            return Err(ContrastiveError::Shape(
                "caption groups do not match batch".into(),
            ));
        }
        let positives = self
            .positives
            .iter()
            .zip(positive_captions)
            .map(|(p, c)| fuse_hadamard(p, c))
            .collect::<Result<Vec<_>, _>>()?;
        let mut negatives = Vec::with_capacity(self.len());
        for ((negs, caps), mask) in self
            .negatives
            .iter()
            .zip(negative_captions)
            .zip(&self.masks)
        {
            if caps.len() != negs.len() {
                return Err(ContrastiveError::Shape(
                    "caption groups do not match batch".into(),
                ));
            }
            let row = negs
                .iter()
                .zip(caps)
                .zip(mask)
                .map(|((n, c), &on)| {
                    if on {
                        fuse_hadamard(n, c)
                    } else {
                        Ok(n.clone())
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            negatives.push(row);
        }
        Ok(Self {
            queries: self.queries.clone(),
            positives,
            negatives,
            masks: self.masks.clone(),
            tau: self.tau,
        })
    }
}

fn check_tau<T: Scalar>(tau: T) -> Result<(), ContrastiveError> {
    if tau > T::zero() && tau.is_finite() {
        Ok(())
    } else {
        Err(ContrastiveError::Temperature(
            tau.to_f64().unwrap_or(f64::NAN),
        ))
    }
}

fn named(err: VectorError, role: &str) -> ContrastiveError {
    match err {
        VectorError::ZeroNorm { .. } => ContrastiveError::ZeroNorm(role.to_string()),
        other => ContrastiveError::Vector(other),
    }
}

fn sim<T: Scalar>(q: &[T], other: &[T], role: &str) -> Result<T, ContrastiveError> {
    cosine(q, other).map_err(|e| match e {
        VectorError::ZeroNorm { side: 0 } => ContrastiveError::ZeroNorm("query".into()),
        e => named(e, role),
    })
}

/// `-log(e^{s+/tau} / (e^{s+/tau} + sum_j e^{s_j/tau}))` over unmasked negatives,
/// with `s = cosine(query, .)`.
pub fn info_nce<T: Scalar>(
    query: &[T],
    positive: &[T],
    negatives: &[Vec<T>],
    mask: &[bool],
    tau: T,
) -> Result<T, ContrastiveError> {
    check_tau(tau)?;
    if negatives.len() != mask.len() {
        return Err(ContrastiveError::Shape(
            "mask length differs from negatives".into(),
        ));
    }
    let pos = sim(query, positive, "positive")? / tau;
    let mut logits = Vec::with_capacity(negatives.len());
    for (j, (neg, &on)) in negatives.iter().zip(mask).enumerate() {
        if on {
            logits.push(sim(query, neg, &format!("negative {j}"))? / tau);
        }
    }
    Ok(nce_from_logits(pos, &logits))
}

/// `log(e^pos + sum e^neg) - pos`, keeping precision when the loss is tiny.
fn nce_from_logits<T: Scalar>(pos: T, negs: &[T]) -> T {
    let m = negs.iter().copied().fold(pos, T::max);
    if m == pos {
        negs.iter().map(|&x| (x - pos).exp()).sum::<T>().ln_1p()
    } else {
        let rest: T = negs.iter().map(|&x| (x - m).exp()).sum();
        (m - pos) + ((pos - m).exp() + rest).ln()
    }
}

/// d cosine(a, b) / d a, given the cosine value.
fn cosine_grad_wrt_first<T: Scalar>(a: &[T], b: &[T], rho: T) -> Vec<T> {
    let na = norm(a);
    let nb = norm(b);
    let inv = T::one() / (na * nb);
    let r = rho / (na * na);
    a.iter().zip(b).map(|(&x, &y)| y * inv - r * x).collect()
}

/// InfoNCE value and its analytic gradient through the cosine similarities.
pub fn info_nce_term_grad<T: Scalar>(
    query: &[T],
    positive: &[T],
    negatives: &[Vec<T>],
    mask: &[bool],
    tau: T,
) -> Result<TermGradient<T>, ContrastiveError> {
    check_tau(tau)?;
    if negatives.len() != mask.len() {
        return Err(ContrastiveError::Shape(
            "mask length differs from negatives".into(),
        ));
    }
    let rho_pos = sim(query, positive, "positive")?;
    let mut rhos = Vec::with_capacity(negatives.len());
    for (j, (neg, &on)) in negatives.iter().zip(mask).enumerate() {
        rhos.push(if on {
            Some(sim(query, neg, &format!("negative {j}"))?)
        } else {
            None
        });
    }
    let pos_logit = rho_pos / tau;
    let logits: Vec<T> = rhos.iter().flatten().map(|&r| r / tau).collect();
    let loss = nce_from_logits(pos_logit, &logits);
    let lse = pos_logit + loss;

    // dL/d rho_+ = (p_+ - 1)/tau, dL/d rho_j = p_j/tau
    let d_pos = (-loss).exp_m1() / tau;
    let mut g_query: Vec<T> = cosine_grad_wrt_first(query, positive, rho_pos)
        .into_iter()
        .map(|g| g * d_pos)
        .collect();
    let g_positive: Vec<T> = cosine_grad_wrt_first(positive, query, rho_pos)
        .into_iter()
        .map(|g| g * d_pos)
        .collect();
    let mut g_negatives = Vec::with_capacity(negatives.len());
    for (neg, rho) in negatives.iter().zip(&rhos) {
        match rho {
            Some(r) => {
                let d = (*r / tau - lse).exp() / tau;
                for (gq, g) in g_query
                    .iter_mut()
                    .zip(cosine_grad_wrt_first(query, neg, *r))
                {
                    *gq += g * d;
                }
                g_negatives.push(
                    cosine_grad_wrt_first(neg, query, *r)
                        .into_iter()
                        .map(|g| g * d)
                        .collect(),
                );
            }
            None => g_negatives.push(vec![T::zero(); neg.len()]),
        }
    }
    Ok(TermGradient {
        loss,
        query: g_query,
        positive: g_positive,
        negatives: g_negatives,
    })
}

/// Mean InfoNCE over the batch.
pub fn batch_loss<T: Scalar>(batch: &LossBatch<T>) -> Result<T, ContrastiveError> {
    batch.check()?;
    let mut total = T::zero();
    for i in 0..batch.len() {
        total += info_nce(
            &batch.queries[i],
            &batch.positives[i],
            &batch.negatives[i],
            &batch.masks[i],
            batch.tau,
        )?;
    }
    Ok(total / count(batch.len()))
}

/// Analytic gradient of [`batch_loss`].
pub fn info_nce_grad<T: Scalar>(
    batch: &LossBatch<T>,
) -> Result<BatchGradient<T>, ContrastiveError> {
    batch.check()?;
    let scale = T::one() / count(batch.len());
    let mut out = BatchGradient {
        loss: T::zero(),
        queries: Vec::with_capacity(batch.len()),
        positives: Vec::with_capacity(batch.len()),
        negatives: Vec::with_capacity(batch.len()),
    };
    for i in 0..batch.len() {
        let term = info_nce_term_grad(
            &batch.queries[i],
            &batch.positives[i],
            &batch.negatives[i],
            &batch.masks[i],
            batch.tau,
        )?;
        out.loss += term.loss * scale;
        out.queries.push(scaled(term.query, scale));
        out.positives.push(scaled(term.positive, scale));
        out.negatives.push(
            term.negatives
                .into_iter()
                .map(|g| scaled(g, scale))
                .collect(),
        );
    }
    Ok(out)
}

fn scaled<T: Scalar>(v: Vec<T>, s: T) -> Vec<T> {
    v.into_iter().map(|x| x * s).collect()
}

/// Intra-paper objective: abstract as query, its graphical abstract as the
/// positive, the paper's other (sampled, padded) figures as negatives.
pub fn loss_intra<T: Scalar>(batch: &LossBatch<T>) -> Result<T, ContrastiveError> {
    batch.check()?;
    for (i, ga) in batch.positives.iter().enumerate() {
        if norm(ga) == T::zero() {
            return Err(ContrastiveError::ZeroNorm(format!(
                "graphical abstract of row {i}"
            )));
        }
    }
    batch_loss(batch)
}

fn inter_batch<T: Scalar>(queries: &[Vec<T>], positives: &[Vec<T>], tau: T) -> LossBatch<T> {
    let n = queries.len();
    LossBatch {
        queries: queries.to_vec(),
        positives: positives.to_vec(),
        negatives: (0..n)
            .map(|i| {
                positives
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, v)| v.clone())
                    .collect()
            })
            .collect(),
        masks: vec![vec![true; n.saturating_sub(1)]; n],
        tau,
    }
}

fn check_inter<T: Scalar>(
    abstracts: &[Vec<T>],
    gas: &[Vec<T>],
    tau: T,
) -> Result<(), ContrastiveError> {
    check_tau(tau)?;
    if abstracts.len() != gas.len() {
        return Err(ContrastiveError::Shape(format!(
            "{} abstracts vs {} graphical abstracts",
            abstracts.len(),
            gas.len()
        )));
    }
    if abstracts.len() < 2 {
        return Err(ContrastiveError::BatchTooSmall(abstracts.len()));
    }
    Ok(())
}

/// Symmetric cross-paper objective: half text-to-image InfoNCE (other
/// papers' graphical abstracts as negatives), half image-to-text.
pub fn loss_inter<T: Scalar>(
    abstracts: &[Vec<T>],
    gas: &[Vec<T>],
    tau: T,
) -> Result<T, ContrastiveError> {
    check_inter(abstracts, gas, tau)?;
    let half = lit::<T>(0.5);
    let t2i = batch_loss(&inter_batch(abstracts, gas, tau))?;
    let i2t = batch_loss(&inter_batch(gas, abstracts, tau))?;
    Ok(half * t2i + half * i2t)
}

/// Loss, then gradients for each abstract and each graphical abstract.
pub type InterGradient<T> = (T, Vec<Vec<T>>, Vec<Vec<T>>);

/// [`loss_inter`] with gradients for every abstract and graphical abstract.
pub fn loss_inter_grad<T: Scalar>(
    abstracts: &[Vec<T>],
    gas: &[Vec<T>],
    tau: T,
) -> Result<InterGradient<T>, ContrastiveError> {
    check_inter(abstracts, gas, tau)?;
    let n = abstracts.len();
    let half = lit::<T>(0.5);
    let mut d_abs: Vec<Vec<T>> = abstracts.iter().map(|v| vec![T::zero(); v.len()]).collect();
    let mut d_gas: Vec<Vec<T>> = gas.iter().map(|v| vec![T::zero(); v.len()]).collect();
    let mut loss = T::zero();
    // (queries, positives, d_queries, d_positives) for both directions
    for direction in 0..2 {
        let (qs, ps) = if direction == 0 {
            (abstracts, gas)
        } else {
            (gas, abstracts)
        };
        let g = info_nce_grad(&inter_batch(qs, ps, tau))?;
        loss += half * g.loss;
        let (dq, dp) = if direction == 0 {
            (&mut d_abs, &mut d_gas)
        } else {
            (&mut d_gas, &mut d_abs)
        };
        for i in 0..n {
            add_into(&mut dq[i], &g.queries[i], half);
            add_into(&mut dp[i], &g.positives[i], half);
            let others = (0..n).filter(|&j| j != i);
            for (slot, j) in others.enumerate() {
                add_into(&mut dp[j], &g.negatives[i][slot], half);
            }
        }
    }
    Ok((loss, d_abs, d_gas))
}

fn add_into<T: Scalar>(acc: &mut [T], g: &[T], scale: T) {
    for (a, &x) in acc.iter_mut().zip(g) {
        *a += scale * x;
    }
}

/// [`loss_inter`] with every graphical abstract fused with its caption.
pub fn loss_inter_fused<T: Scalar>(
    abstracts: &[Vec<T>],
    gas: &[Vec<T>],
    captions: &[Vec<T>],
    tau: T,
) -> Result<T, ContrastiveError> {
    if captions.len() != gas.len() {
        return Err(ContrastiveError::Shape(
            "one caption per graphical abstract".into(),
        ));
    }
    let fused = gas
        .iter()
        .zip(captions)
        .map(|(g, c)| fuse_hadamard(g, c))
        .collect::<Result<Vec<_>, _>>()?;
    loss_inter(abstracts, &fused, tau)
}

/// [`loss_intra`] with every figure fused with its caption.
pub fn loss_intra_fused<T: Scalar>(
    batch: &LossBatch<T>,
    positive_captions: &[Vec<T>],
    negative_captions: &[Vec<Vec<T>>],
) -> Result<T, ContrastiveError> {
    loss_intra(&batch.fused(positive_captions, negative_captions)?)
}

/// Chain rule through `z = x * c` (componentwise): `dL/dx = dL/dz * c`.
pub fn unfuse_grad<T: Scalar>(grad_fused: &[T], caption: &[T]) -> Vec<T> {
    grad_fused
        .iter()
        .zip(caption)
        .map(|(&g, &c)| g * c)
        .collect()
}

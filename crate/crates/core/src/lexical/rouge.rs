use super::TokenSeq;

/// Recall weight of the F-measure (`beta^2 = 1.44`).
pub const ROUGE_BETA: f64 = 1.2;

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based F-measure `(1 + b^2) P R / (R + b^2 P)`; 0 for empty input.
pub fn rouge_l(candidate: &TokenSeq, reference: &TokenSeq) -> f64 {
    let lcs = lcs_len(candidate.tokens(), reference.tokens());
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / candidate.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    ((1.0 + b2) * p * r) / (r + b2 * p)
}

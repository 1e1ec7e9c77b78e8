//! Brute-force oracles shared by the integration tests.
//!
//! Everything here recomputes a library result from first principles in
//! plain scalar loops, structured differently from the production code so a
//! bug there cannot hide in its own mirror image. Agreement is bitwise where
//! the arithmetic is identical and to roundoff where only the grouping
//! differs.

#![allow(dead_code)]

use dimprune::model::{forward, ModelWeights};

/// Importance scores recomputed with a bare quadruple loop over samples,
/// blocks, positions, and dimensions. Raw absolute activations are summed
/// first and the block and token denominators divide once at the end, a
/// different grouping from the streaming accumulator, so scores agree to
/// roundoff rather than bitwise.
pub fn importance_oracle(weights: &ModelWeights, samples: &[Vec<u32>]) -> Vec<f64> {
    let d = weights.config.d;
    let n_blocks = weights.config.n_blocks;
    let mut sums = vec![0.0; d];
    let mut n_tokens = 0usize;
    for sample in samples {
        let (_, trace) = forward(weights, sample, true).expect("oracle forward");
        let trace = trace.expect("capture was requested");
        for block in 0..n_blocks {
            for j in 0..sample.len() {
                for (k, s) in sums.iter_mut().enumerate() {
                    *s += trace.mlp_out[block].get(j, k).abs();
                }
            }
        }
        n_tokens += sample.len();
    }
    assert!(n_tokens > 0, "oracle needs at least one token");
    sums.iter()
        .map(|s| s / n_blocks as f64 / n_tokens as f64)
        .collect()
}

/// Majority-vote merge recomputed by counting and then repeatedly scanning
/// for the untaken dimension with the highest count. The strict `>` in the
/// scan keeps the earliest index among count ties, the same rule the library
/// implements through its sort.
pub fn vote_merge_oracle(selector_bits: &[Vec<bool>], width: usize) -> Vec<usize> {
    let d = selector_bits[0].len();
    let mut counts = vec![0u32; d];
    for bits in selector_bits {
        assert_eq!(bits.len(), d, "oracle selectors must share one width");
        for (k, &voted) in bits.iter().enumerate() {
            if voted {
                counts[k] += 1;
            }
        }
    }
    let mut taken = vec![false; d];
    for _ in 0..width {
        let mut best: Option<usize> = None;
        for k in 0..d {
            if taken[k] {
                continue;
            }
            match best {
                Some(b) if counts[k] <= counts[b] => {}
                _ => best = Some(k),
            }
        }
        taken[best.expect("width exceeds dimension count")] = true;
    }
    (0..d).filter(|&k| taken[k]).collect()
}

/// Bottom-`width` selection recomputed by repeated minimum scans; the strict
/// `<` keeps the earliest index among score ties.
pub fn bottom_k_oracle(scores: &[f64], width: usize) -> Vec<usize> {
    let d = scores.len();
    let mut taken = vec![false; d];
    for _ in 0..width {
        let mut best: Option<usize> = None;
        for k in 0..d {
            if taken[k] {
                continue;
            }
            match best {
                Some(b) if scores[k] >= scores[b] => {}
                _ => best = Some(k),
            }
        }
        taken[best.expect("width exceeds score count")] = true;
    }
    (0..d).filter(|&k| taken[k]).collect()
}

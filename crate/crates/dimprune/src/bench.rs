//! Wall-clock forward-pass timing plus analytic cost figures.
//!
//! Timings answer "how fast is this model on this machine today"; the
//! analytic parameter, FLOP, and activation-memory numbers answer "how much
//! smaller did pruning make it" independent of machine noise. Reports carry
//! both so speedups can be sanity-checked against the cost model.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{cost_report, forward, ModelWeights};

/// Timing and cost summary for one model at one sequence length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub d: usize,
    pub seq_len: usize,
    pub n_warmup: usize,
    pub n_iters: usize,
    pub wall_ms_mean: f64,
    pub wall_ms_median: f64,
    pub wall_ms_stddev: f64,
    /// Throughput from the mean iteration time.
    pub tokens_per_second: f64,
    pub param_count: u64,
    pub flops_per_token: u64,
    pub peak_activation_bytes: u64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn stddev(xs: &[f64], m: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let var = xs.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    var.sqrt()
}

/// Times repeated forward passes over one seeded random token sequence.
/// The same seed and config produce the same input stream, so two models
/// being compared see identical work.
pub fn run_bench(
    weights: &ModelWeights,
    seq_len: usize,
    n_warmup: usize,
    n_iters: usize,
    seed: u64,
) -> Result<BenchResult> {
    weights.validate()?;
    if n_iters == 0 {
        return Err(Error::Input("benchmark needs at least one iteration".into()));
    }
    let config = &weights.config;
    let costs = cost_report(config, seq_len)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tokens: Vec<u32> = (0..seq_len)
        .map(|_| rng.gen_range(0..config.vocab as u32))
        .collect();

    for _ in 0..n_warmup {
        forward(weights, &tokens, false)?;
    }
    let mut samples_ms = Vec::with_capacity(n_iters);
    for _ in 0..n_iters {
        let start = Instant::now();
        let (logits, _) = forward(weights, &tokens, false)?;
        let elapsed = start.elapsed();
        std::hint::black_box(&logits);
        samples_ms.push(elapsed.as_secs_f64() * 1e3);
    }
    let mut sorted = samples_ms.clone();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let m = mean(&samples_ms);
    Ok(BenchResult {
        d: config.d,
        seq_len,
        n_warmup,
        n_iters,
        wall_ms_mean: m,
        wall_ms_median: median(&sorted),
        wall_ms_stddev: stddev(&samples_ms, m),
        tokens_per_second: seq_len as f64 / (m / 1e3),
        param_count: weights.param_count(),
        flops_per_token: costs.flops_per_token,
        peak_activation_bytes: costs.peak_activation_bytes,
    })
}

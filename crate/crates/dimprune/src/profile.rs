//! Task-wise activation profiling of residual dimensions.
//!
//! For each sample the forward pass captures the MLP output of every block
//! before its residual add. Per position, the absolute activations are
//! averaged across blocks; summing those over all positions of all samples
//! and dividing by the total token count gives one importance score per
//! residual dimension:
//!
//! `a[k] = (sum over samples i, positions j of mean over blocks b of
//! |h[i,b][j,k]|) / (sum over samples of L[i])`
//!
//! Low-scoring dimensions carry little activation mass for the task and are
//! the candidates a [`TaskSelector`] marks for pruning.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{forward, ActivationTrace, ModelWeights};

/// How a profiling run subsamples and truncates its corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    /// Number of samples to draw without replacement, `None` for the full
    /// corpus. Draws are seeded and the drawn set keeps corpus order.
    pub n_samples: Option<usize>,
    /// Seed for the subsampling draw.
    pub seed: u64,
    /// Upper bound on tokens per sample; longer samples are truncated. The
    /// model's `max_seq` applies as a second bound.
    pub max_tokens_per_sample: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            n_samples: Some(100),
            seed: 42,
            max_tokens_per_sample: 512,
        }
    }
}

/// What a profiling run writes to disk: the raw scores plus the selector
/// cut from them, so both vote and continuous merging can read one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskProfile {
    pub importance: ImportanceVector,
    pub selector: TaskSelector,
}

/// Mean absolute activation per residual dimension for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub task_id: String,
    pub d: usize,
    /// Samples that entered the aggregate after subsampling.
    pub n_samples: usize,
    /// Total tokens across those samples after truncation.
    pub n_tokens: u64,
    pub scores: Vec<f64>,
}

impl ImportanceVector {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.scores.len() != self.d {
            return Err(Error::Consistency(format!(
                "importance vector for {} has {} scores, d says {}",
                self.task_id,
                self.scores.len(),
                self.d
            )));
        }
        if self.scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Consistency(format!(
                "importance vector for {} contains non-finite scores",
                self.task_id
            )));
        }
        Ok(())
    }
}

/// The bottom-scoring dimensions of one task, marked for pruning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSelector {
    pub task_id: String,
    pub d: usize,
    /// Requested sparsity; `indices` holds `floor(sparsity * d)` entries.
    pub sparsity: f64,
    /// Pruned dimensions, strictly ascending.
    pub indices: Vec<usize>,
}

impl TaskSelector {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Consistency(format!(
                "selector for {} has d = 0",
                self.task_id
            )));
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return Err(Error::Consistency(format!(
                "selector for {} has sparsity {} outside [0, 1]",
                self.task_id, self.sparsity
            )));
        }
        if self.indices.len() != selection_width(self.d, self.sparsity)? {
            return Err(Error::Consistency(format!(
                "selector for {} holds {} indices, sparsity {} over d {} requires {}",
                self.task_id,
                self.indices.len(),
                self.sparsity,
                self.d,
                selection_width(self.d, self.sparsity)?
            )));
        }
        check_ascending_in_range(&self.indices, self.d)
            .map_err(|m| Error::Consistency(format!("selector for {}: {m}", self.task_id)))
    }

    /// Number of pruned dimensions.
    #[must_use]
    pub fn popcount(&self) -> usize {
        self.indices.len()
    }

    /// Dense 0/1 view: `true` where the dimension is pruned.
    #[must_use]
    pub fn bits(&self) -> Vec<bool> {
        let mut z = vec![false; self.d];
        for &i in &self.indices {
            z[i] = true;
        }
        z
    }
}

/// `floor(s * d)`, the number of dimensions a sparsity selects.
pub fn selection_width(d: usize, s: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Input(format!("sparsity {s} is outside [0, 1]")));
    }
    Ok(((s * d as f64).floor() as usize).min(d))
}

pub(crate) fn check_ascending_in_range(indices: &[usize], d: usize) -> std::result::Result<(), String> {
    for (i, &v) in indices.iter().enumerate() {
        if v >= d {
            return Err(format!("index {v} out of range for d = {d}"));
        }
        if i > 0 && indices[i - 1] >= v {
            return Err("indices must be strictly ascending".to_string());
        }
    }
    Ok(())
}

/// Streaming accumulator for importance scores.
///
/// Samples can be added one at a time and partial accumulators merged, so
/// profiling parallelizes across samples. Merging is associative up to
/// floating-point summation order; sums agree to roundoff, not bitwise,
/// when the grouping changes.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceAccumulator {
    d: usize,
    sums: Vec<f64>,
    n_tokens: u64,
    n_samples: usize,
}

impl ImportanceAccumulator {
    #[must_use]
    pub fn new(d: usize) -> Self {
        ImportanceAccumulator {
            d,
            sums: vec![0.0; d],
            n_tokens: 0,
            n_samples: 0,
        }
    }

    /// Folds one sample's captured activations into the running sums.
    pub fn add_sample(&mut self, trace: &ActivationTrace) -> Result<()> {
        let n_blocks = trace.mlp_out.len();
        if n_blocks == 0 {
            return Err(Error::Input("trace holds no block activations".into()));
        }
        let l = trace.valid_token_count;
        for m in &trace.mlp_out {
            if m.cols() != self.d {
                return Err(Error::Consistency(format!(
                    "trace width {} does not match accumulator width {}",
                    m.cols(),
                    self.d
                )));
            }
            if m.rows() != l {
                return Err(Error::Consistency(
                    "trace blocks disagree on sequence length".into(),
                ));
            }
        }
        let inv_b = 1.0 / n_blocks as f64;
        for j in 0..l {
            for k in 0..self.d {
                let mut acc = 0.0;
                for m in &trace.mlp_out {
                    acc += m.get(j, k).abs();
                }
                self.sums[k] += acc * inv_b;
            }
        }
        self.n_tokens += l as u64;
        self.n_samples += 1;
        Ok(())
    }

    /// Combines a partial accumulator produced elsewhere.
    pub fn merge(&mut self, other: &ImportanceAccumulator) -> Result<()> {
        if other.d != self.d {
            return Err(Error::Consistency(format!(
                "cannot merge accumulators of widths {} and {}",
                other.d, self.d
            )));
        }
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        self.n_tokens += other.n_tokens;
        self.n_samples += other.n_samples;
        Ok(())
    }

    /// Divides by the total token count. Errors if nothing was accumulated.
    pub fn finish(self, task_id: impl Into<String>) -> Result<ImportanceVector> {
        if self.n_tokens == 0 {
            return Err(Error::Input(
                "cannot finish an importance vector over zero tokens".into(),
            ));
        }
        let denom = self.n_tokens as f64;
        let vector = ImportanceVector {
            task_id: task_id.into(),
            d: self.d,
            n_samples: self.n_samples,
            n_tokens: self.n_tokens,
            scores: self.sums.iter().map(|s| s / denom).collect(),
        };
        vector.validate()?;
        Ok(vector)
    }
}

/// Profiles one task: runs every (sub)sampled sequence through the model
/// with activation capture and aggregates importance scores.
///
/// Samples must be non-empty token sequences within the model vocabulary.
/// When `cfg.n_samples` is smaller than the corpus, a seeded draw without
/// replacement picks the subset; the drawn samples keep their corpus order,
/// so reordering the corpus leaves a full-corpus profile unchanged up to
/// summation roundoff.
pub fn profile_task(
    weights: &ModelWeights,
    samples: &[Vec<u32>],
    task_id: &str,
    cfg: &ProfileConfig,
) -> Result<ImportanceVector> {
    if samples.is_empty() {
        return Err(Error::Input(format!(
            "task {task_id} has no samples to profile"
        )));
    }
    if cfg.max_tokens_per_sample == 0 {
        return Err(Error::Input("max_tokens_per_sample must be at least 1".into()));
    }
    if let Some(0) = cfg.n_samples {
        return Err(Error::Input("n_samples must be at least 1".into()));
    }
    let chosen: Vec<usize> = match cfg.n_samples {
        Some(n) if n < samples.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut picked = rand::seq::index::sample(&mut rng, samples.len(), n).into_vec();
            picked.sort_unstable();
            picked
        }
        _ => (0..samples.len()).collect(),
    };
    let cap = cfg.max_tokens_per_sample.min(weights.config.max_seq);
    let mut acc = ImportanceAccumulator::new(weights.config.d);
    for &i in &chosen {
        let sample = &samples[i];
        if sample.is_empty() {
            return Err(Error::Input(format!(
                "sample {i} of task {task_id} is empty"
            )));
        }
        let truncated = &sample[..sample.len().min(cap)];
        let (_, trace) = forward(weights, truncated, true)?;
        acc.add_sample(&trace.expect("capture was requested"))?;
    }
    acc.finish(task_id)
}

/// Marks the `floor(s * d)` lowest-scoring dimensions for pruning. Ties are
/// broken toward the lower index, so the result is deterministic.
pub fn select_bottom(importance: &ImportanceVector, s: f64) -> Result<TaskSelector> {
    importance.validate()?;
    let k = selection_width(importance.d, s)?;
    let mut order: Vec<usize> = (0..importance.d).collect();
    order.sort_unstable_by(|&a, &b| {
        importance.scores[a]
            .partial_cmp(&importance.scores[b])
            .expect("scores validated finite")
            .then(a.cmp(&b))
    });
    let mut indices: Vec<usize> = order[..k].to_vec();
    indices.sort_unstable();
    let selector = TaskSelector {
        task_id: importance.task_id.clone(),
        d: importance.d,
        sparsity: s,
        indices,
    };
    selector.validate()?;
    Ok(selector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, ModelConfig};

    fn importance(scores: &[f64]) -> ImportanceVector {
        ImportanceVector {
            task_id: "t".into(),
            d: scores.len(),
            n_samples: 1,
            n_tokens: 1,
            scores: scores.to_vec(),
        }
    }

    #[test]
    fn selection_width_floors() {
        assert_eq!(selection_width(4, 0.5).unwrap(), 2);
        assert_eq!(selection_width(10, 0.33).unwrap(), 3);
        assert_eq!(selection_width(10, 0.0).unwrap(), 0);
        assert_eq!(selection_width(10, 1.0).unwrap(), 10);
        assert_eq!(selection_width(2304, 0.2).unwrap(), 460);
        assert!(selection_width(4, -0.1).is_err());
        assert!(selection_width(4, 1.5).is_err());
    }

    #[test]
    fn select_bottom_picks_smallest() {
        let sel = select_bottom(&importance(&[0.5, 0.1, 0.9, 0.2]), 0.5).unwrap();
        assert_eq!(sel.indices, vec![1, 3]);
        assert_eq!(sel.popcount(), 2);
    }

    #[test]
    fn select_bottom_breaks_ties_toward_low_index() {
        let sel = select_bottom(&importance(&[0.3, 0.3, 0.3, 0.9]), 0.25).unwrap();
        assert_eq!(sel.indices, vec![0]);
    }

    #[test]
    fn select_bottom_handles_extremes() {
        assert!(select_bottom(&importance(&[1.0, 2.0]), 0.0)
            .unwrap()
            .indices
            .is_empty());
        assert_eq!(
            select_bottom(&importance(&[1.0, 2.0]), 1.0).unwrap().indices,
            vec![0, 1]
        );
        assert!(select_bottom(&importance(&[1.0, 2.0]), 1.2).is_err());
    }

    #[test]
    fn selector_bits_match_indices() {
        let sel = select_bottom(&importance(&[0.5, 0.1, 0.9, 0.2]), 0.5).unwrap();
        assert_eq!(sel.bits(), vec![false, true, false, true]);
    }

    #[test]
    fn profiling_requires_samples() {
        let cfg = ModelConfig::new(8, 1, 2, 16, 32, 16).unwrap();
        let w = build_model(&cfg, 1).unwrap();
        let none: Vec<Vec<u32>> = vec![];
        assert!(profile_task(&w, &none, "t", &ProfileConfig::default()).is_err());
        let empty_sample = vec![vec![]];
        assert!(profile_task(&w, &empty_sample, "t", &ProfileConfig::default()).is_err());
    }

    #[test]
    fn single_token_single_block_profile_is_plain_abs() {
        let cfg = ModelConfig::new(8, 1, 2, 16, 32, 16).unwrap();
        let w = build_model(&cfg, 2).unwrap();
        let (_, trace) = forward(&w, &[5], true).unwrap();
        let trace = trace.unwrap();
        let imp = profile_task(&w, &[vec![5]], "t", &ProfileConfig::default()).unwrap();
        assert_eq!(imp.n_tokens, 1);
        for k in 0..cfg.d {
            assert_eq!(imp.scores[k], trace.mlp_out[0].get(0, k).abs());
        }
    }

    #[test]
    fn token_denominator_spans_samples() {
        // Two samples of lengths 2 and 3: scores divide by 5 and average the
        // two blocks position-wise, which the trace recomputation mirrors.
        let cfg = ModelConfig::new(8, 2, 2, 16, 32, 16).unwrap();
        let w = build_model(&cfg, 3).unwrap();
        let samples = vec![vec![1, 2], vec![3, 4, 5]];
        let imp = profile_task(&w, &samples, "t", &ProfileConfig::default()).unwrap();
        assert_eq!(imp.n_tokens, 5);
        assert_eq!(imp.n_samples, 2);
        let mut expected = vec![0.0; cfg.d];
        for sample in &samples {
            let (_, trace) = forward(&w, sample, true).unwrap();
            let trace = trace.unwrap();
            for j in 0..sample.len() {
                for (k, e) in expected.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for m in &trace.mlp_out {
                        acc += m.get(j, k).abs();
                    }
                    *e += acc / cfg.n_blocks as f64;
                }
            }
        }
        for k in 0..cfg.d {
            assert!((imp.scores[k] - expected[k] / 5.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zeroed_mlp_rows_score_exactly_zero() {
        let cfg = ModelConfig::new(8, 2, 2, 16, 32, 16).unwrap();
        let mut w = build_model(&cfg, 4).unwrap();
        for b in &mut w.blocks {
            b.mlp_out.weight.zero_row(3);
            b.mlp_out.weight.zero_row(6);
        }
        let imp = profile_task(&w, &[vec![1, 2, 3], vec![9]], "t", &ProfileConfig::default())
            .unwrap();
        assert_eq!(imp.scores[3], 0.0);
        assert_eq!(imp.scores[6], 0.0);
        assert!(imp.scores[0] > 0.0);
    }

    #[test]
    fn doubling_activations_doubles_scores_and_keeps_selection() {
        // One block, so scaling mlp_out by a power of two scales the captured
        // activations exactly and the selection cannot move.
        let cfg = ModelConfig::new(8, 1, 2, 16, 32, 16).unwrap();
        let w = build_model(&cfg, 5).unwrap();
        let mut scaled = w.clone();
        for b in &mut scaled.blocks {
            b.mlp_out.weight.scale_in_place(2.0);
        }
        let samples = vec![vec![7, 8, 9], vec![1, 2]];
        let base = profile_task(&w, &samples, "t", &ProfileConfig::default()).unwrap();
        let twice = profile_task(&scaled, &samples, "t", &ProfileConfig::default()).unwrap();
        for k in 0..cfg.d {
            assert_eq!(twice.scores[k], 2.0 * base.scores[k]);
        }
        assert_eq!(
            select_bottom(&base, 0.25).unwrap().indices,
            select_bottom(&twice, 0.25).unwrap().indices
        );
    }

    #[test]
    fn sample_order_is_immaterial_up_to_roundoff() {
        let cfg = ModelConfig::new(8, 2, 2, 16, 32, 16).unwrap();
        let w = build_model(&cfg, 6).unwrap();
        let cfg_all = ProfileConfig {
            n_samples: None,
            ..ProfileConfig::default()
        };
        let samples = vec![vec![1, 2, 3], vec![4, 5], vec![6, 7, 8, 9]];
        let reversed: Vec<Vec<u32>> = samples.iter().rev().cloned().collect();
        let a = profile_task(&w, &samples, "t", &cfg_all).unwrap();
        let b = profile_task(&w, &reversed, "t", &cfg_all).unwrap();
        for k in 0..cfg.d {
            assert!((a.scores[k] - b.scores[k]).abs() < 1e-12);
        }
        assert_eq!(
            select_bottom(&a, 0.25).unwrap().indices,
            select_bottom(&b, 0.25).unwrap().indices
        );
    }

    #[test]
    fn subsampling_is_seeded_and_bounded() {
        let cfg = ModelConfig::new(8, 1, 2, 16, 32, 16).unwrap();
        let w = build_model(&cfg, 7).unwrap();
        let samples: Vec<Vec<u32>> = (0..20).map(|i| vec![i as u32, 1, 2]).collect();
        let pc = ProfileConfig {
            n_samples: Some(5),
            seed: 42,
            max_tokens_per_sample: 512,
        };
        let a = profile_task(&w, &samples, "t", &pc).unwrap();
        let b = profile_task(&w, &samples, "t", &pc).unwrap();
        assert_eq!(a, b, "same seed must pick the same subset");
        assert_eq!(a.n_samples, 5);
        let other_seed = ProfileConfig { seed: 43, ..pc };
        let c = profile_task(&w, &samples, "t", &other_seed).unwrap();
        assert_eq!(c.n_samples, 5);
        assert_ne!(a.scores, c.scores, "different seed should pick differently");
    }

    #[test]
    fn truncation_caps_token_counts() {
        let cfg = ModelConfig::new(8, 1, 2, 16, 32, 16).unwrap();
        let w = build_model(&cfg, 8).unwrap();
        let pc = ProfileConfig {
            n_samples: None,
            seed: 42,
            max_tokens_per_sample: 2,
        };
        let imp = profile_task(&w, &[vec![1, 2, 3, 4, 5]], "t", &pc).unwrap();
        assert_eq!(imp.n_tokens, 2);
    }

    #[test]
    fn merge_matches_sequential_accumulation() {
        let cfg = ModelConfig::new(8, 2, 2, 16, 32, 16).unwrap();
        let w = build_model(&cfg, 9).unwrap();
        let samples = vec![vec![1u32, 2], vec![3, 4, 5], vec![6]];
        let traces: Vec<_> = samples
            .iter()
            .map(|s| forward(&w, s, true).unwrap().1.unwrap())
            .collect();
        let mut seq = ImportanceAccumulator::new(cfg.d);
        for t in &traces {
            seq.add_sample(t).unwrap();
        }
        let mut left = ImportanceAccumulator::new(cfg.d);
        left.add_sample(&traces[0]).unwrap();
        let mut right = ImportanceAccumulator::new(cfg.d);
        right.add_sample(&traces[1]).unwrap();
        right.add_sample(&traces[2]).unwrap();
        let mut forward_merge = left.clone();
        forward_merge.merge(&right).unwrap();
        let mut backward_merge = right;
        backward_merge.merge(&left).unwrap();
        let a = seq.finish("t").unwrap();
        let b = forward_merge.finish("t").unwrap();
        let c = backward_merge.finish("t").unwrap();
        assert_eq!(a.n_tokens, 6);
        for k in 0..cfg.d {
            assert!((a.scores[k] - b.scores[k]).abs() < 1e-12);
            assert!((b.scores[k] - c.scores[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn finish_rejects_empty_accumulator() {
        assert!(ImportanceAccumulator::new(4).finish("t").is_err());
    }
}

//! Merging per-task selectors into one global dimension mask.
//!
//! The main path is majority voting: each task selector casts one vote per
//! dimension it wants pruned, and the dimensions with the most votes are
//! omitted globally. A continuous variant averages mean-normalized
//! importance scores instead of binarizing first, and magnitude and random
//! baselines exist for comparison. All selection ties break toward the lower
//! index, so every mask here is a deterministic function of its inputs.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelWeights;
use crate::profile::{
    check_ascending_in_range, selection_width, ImportanceVector, TaskSelector,
};

/// How a [`GlobalMask`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskProvenance {
    /// Majority vote across task selectors.
    Vote,
    /// Mean of mean-normalized importance scores across tasks.
    Continuous,
    /// A single task's selector promoted to a global mask.
    PerTask,
    /// Weight-magnitude baseline, no activations involved.
    Magnitude,
    /// Seeded uniform draw, the control baseline.
    Random,
}

impl MaskProvenance {
    /// Lowercase tag matching the serialized form.
    #[must_use]
    pub fn tag(&self) -> &'static str {
        match self {
            MaskProvenance::Vote => "vote",
            MaskProvenance::Continuous => "continuous",
            MaskProvenance::PerTask => "per_task",
            MaskProvenance::Magnitude => "magnitude",
            MaskProvenance::Random => "random",
        }
    }
}

/// The global set of residual dimensions to remove.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalMask {
    pub d: usize,
    /// Requested sparsity; `omit_indices` holds `floor(sparsity * d)` entries.
    pub sparsity: f64,
    pub provenance: MaskProvenance,
    /// Omitted dimensions, strictly ascending.
    pub omit_indices: Vec<usize>,
    /// Tasks that contributed, empty for task-free baselines.
    pub task_ids: Vec<String>,
}

impl GlobalMask {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Consistency("mask has d = 0".into()));
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return Err(Error::Consistency(format!(
                "mask sparsity {} outside [0, 1]",
                self.sparsity
            )));
        }
        if self.omit_indices.len() != selection_width(self.d, self.sparsity)? {
            return Err(Error::Consistency(format!(
                "mask omits {} dimensions, sparsity {} over d {} requires {}",
                self.omit_indices.len(),
                self.sparsity,
                self.d,
                selection_width(self.d, self.sparsity)?
            )));
        }
        check_ascending_in_range(&self.omit_indices, self.d).map_err(Error::Consistency)
    }

    /// Mask with nothing omitted.
    #[must_use]
    pub fn empty(d: usize, provenance: MaskProvenance) -> Self {
        GlobalMask {
            d,
            sparsity: 0.0,
            provenance,
            omit_indices: Vec::new(),
            task_ids: Vec::new(),
        }
    }

    /// Promotes one task's selector to a global mask.
    pub fn from_selector(selector: &TaskSelector) -> Result<Self> {
        selector.validate()?;
        let mask = GlobalMask {
            d: selector.d,
            sparsity: selector.sparsity,
            provenance: MaskProvenance::PerTask,
            omit_indices: selector.indices.clone(),
            task_ids: vec![selector.task_id.clone()],
        };
        mask.validate()?;
        Ok(mask)
    }

    /// Dense omission view: `true` where the dimension is removed.
    #[must_use]
    pub fn omission_bits(&self) -> Vec<bool> {
        let mut m = vec![false; self.d];
        for &i in &self.omit_indices {
            m[i] = true;
        }
        m
    }

    /// Dense keep view, the complement of [`GlobalMask::omission_bits`].
    #[must_use]
    pub fn keep_bits(&self) -> Vec<bool> {
        self.omission_bits().iter().map(|b| !b).collect()
    }

    /// Kept dimensions, ascending.
    #[must_use]
    pub fn kept_indices(&self) -> Vec<usize> {
        let omitted = self.omission_bits();
        (0..self.d).filter(|&k| !omitted[k]).collect()
    }

    /// Number of kept dimensions.
    #[must_use]
    pub fn kept_count(&self) -> usize {
        self.d - self.omit_indices.len()
    }
}

/// Per-dimension vote counts across task selectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteTally {
    pub d: usize,
    /// `counts[k]` tasks voted to prune dimension `k`.
    pub counts: Vec<u32>,
    pub task_ids: Vec<String>,
}

/// Distribution of vote counts: how many dimensions received each count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteHistogram {
    pub n_tasks: usize,
    /// Bucket per possible count `0..=n_tasks`, zero buckets included; the
    /// bucket values sum to `d`.
    pub buckets: BTreeMap<u32, usize>,
}

/// Counts votes. Selectors must agree on `d` and on their popcount; mixing
/// selector sparsities would make the counts incomparable.
pub fn tally_votes(selectors: &[TaskSelector]) -> Result<VoteTally> {
    if selectors.is_empty() {
        return Err(Error::Input("no selectors to tally".into()));
    }
    let d = selectors[0].d;
    let popcount = selectors[0].popcount();
    let mut counts = vec![0u32; d];
    let mut task_ids = Vec::with_capacity(selectors.len());
    for sel in selectors {
        sel.validate()?;
        if sel.d != d {
            return Err(Error::Input(format!(
                "selector for {} has d = {}, others have {d}",
                sel.task_id, sel.d
            )));
        }
        if sel.popcount() != popcount {
            return Err(Error::Input(format!(
                "selector for {} prunes {} dimensions, others prune {popcount}; \
                 selectors must share one sparsity",
                sel.task_id,
                sel.popcount()
            )));
        }
        for &i in &sel.indices {
            counts[i] += 1;
        }
        task_ids.push(sel.task_id.clone());
    }
    Ok(VoteTally { d, counts, task_ids })
}

/// Majority-vote merge: omits the `floor(s * d)` dimensions with the most
/// votes. Count ties fill from the lower index, including dimensions with
/// zero votes when the target width demands it.
pub fn merge_votes(selectors: &[TaskSelector], s: f64) -> Result<GlobalMask> {
    let tally = tally_votes(selectors)?;
    let k = selection_width(tally.d, s)?;
    let mut order: Vec<usize> = (0..tally.d).collect();
    order.sort_unstable_by(|&a, &b| {
        tally.counts[b].cmp(&tally.counts[a]).then(a.cmp(&b))
    });
    let mut omit: Vec<usize> = order[..k].to_vec();
    omit.sort_unstable();
    let mask = GlobalMask {
        d: tally.d,
        sparsity: s,
        provenance: MaskProvenance::Vote,
        omit_indices: omit,
        task_ids: tally.task_ids,
    };
    mask.validate()?;
    Ok(mask)
}

/// Continuous merge: each task's scores are normalized to unit mean, the
/// normalized scores are averaged across tasks, and the lowest aggregate
/// dimensions are omitted.
pub fn merge_continuous(importances: &[ImportanceVector], s: f64) -> Result<GlobalMask> {
    if importances.is_empty() {
        return Err(Error::Input("no importance vectors to merge".into()));
    }
    let d = importances[0].d;
    let mut aggregate = vec![0.0; d];
    let mut task_ids = Vec::with_capacity(importances.len());
    for imp in importances {
        imp.validate()?;
        if imp.d != d {
            return Err(Error::Input(format!(
                "importance vector for {} has d = {}, others have {d}",
                imp.task_id, imp.d
            )));
        }
        let mean = imp.scores.iter().sum::<f64>() / d as f64;
        if mean == 0.0 {
            return Err(Error::Normalization(format!(
                "importance vector for {} has zero mean and cannot be normalized",
                imp.task_id
            )));
        }
        for (agg, score) in aggregate.iter_mut().zip(&imp.scores) {
            *agg += score / mean;
        }
        task_ids.push(imp.task_id.clone());
    }
    let inv_t = 1.0 / importances.len() as f64;
    for v in &mut aggregate {
        *v *= inv_t;
    }
    let k = selection_width(d, s)?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_unstable_by(|&a, &b| {
        aggregate[a]
            .partial_cmp(&aggregate[b])
            .expect("normalized scores are finite")
            .then(a.cmp(&b))
    });
    let mut omit: Vec<usize> = order[..k].to_vec();
    omit.sort_unstable();
    let mask = GlobalMask {
        d,
        sparsity: s,
        provenance: MaskProvenance::Continuous,
        omit_indices: omit,
        task_ids,
    };
    mask.validate()?;
    Ok(mask)
}

/// Weight-magnitude baseline: scores each residual dimension by the total L1
/// mass of every tensor slice indexed by it (embedding and position columns,
/// query/key/value and MLP input columns, attention output and MLP output
/// rows plus their bias entries, norm gains, and the head's columns; a tied
/// head shares the embedding tensor and is counted once). The lowest-mass
/// dimensions are omitted.
pub fn magnitude_dim_mask(weights: &ModelWeights, s: f64) -> Result<GlobalMask> {
    weights.validate()?;
    let d = weights.config.d;
    let mut scores = vec![0.0; d];
    for (k, score) in scores.iter_mut().enumerate() {
        let mut acc = weights.tok_embedding.abs_column_sum(k)
            + weights.pos_embedding.abs_column_sum(k)
            + weights.final_norm_w[k].abs();
        for b in &weights.blocks {
            acc += b.norm1_w[k].abs() + b.norm2_w[k].abs();
            acc += b.attn_q.weight.abs_column_sum(k)
                + b.attn_k.weight.abs_column_sum(k)
                + b.attn_v.weight.abs_column_sum(k)
                + b.mlp_in.weight.abs_column_sum(k);
            acc += b.attn_o.weight.abs_row_sum(k) + b.mlp_out.weight.abs_row_sum(k);
            if let Some(bias) = &b.attn_o.bias {
                acc += bias[k].abs();
            }
            if let Some(bias) = &b.mlp_out.bias {
                acc += bias[k].abs();
            }
        }
        if let Some(head) = &weights.lm_head {
            acc += head.weight.abs_column_sum(k);
        }
        *score = acc;
    }
    let k = selection_width(d, s)?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_unstable_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .expect("weight magnitudes are finite")
            .then(a.cmp(&b))
    });
    let mut omit: Vec<usize> = order[..k].to_vec();
    omit.sort_unstable();
    let mask = GlobalMask {
        d,
        sparsity: s,
        provenance: MaskProvenance::Magnitude,
        omit_indices: omit,
        task_ids: Vec::new(),
    };
    mask.validate()?;
    Ok(mask)
}

/// Control baseline: a seeded uniform draw of `floor(s * d)` dimensions
/// without replacement.
pub fn random_mask(d: usize, s: f64, seed: u64) -> Result<GlobalMask> {
    if d == 0 {
        return Err(Error::Input("cannot draw a mask over d = 0".into()));
    }
    let k = selection_width(d, s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut omit = rand::seq::index::sample(&mut rng, d, k).into_vec();
    omit.sort_unstable();
    let mask = GlobalMask {
        d,
        sparsity: s,
        provenance: MaskProvenance::Random,
        omit_indices: omit,
        task_ids: Vec::new(),
    };
    mask.validate()?;
    Ok(mask)
}

/// Histogram of vote counts across dimensions. Every count in `0..=T` gets a
/// bucket, so the buckets always partition the `d` dimensions.
pub fn vote_histogram(selectors: &[TaskSelector]) -> Result<VoteHistogram> {
    let tally = tally_votes(selectors)?;
    let t = selectors.len();
    let mut buckets: BTreeMap<u32, usize> = (0..=t as u32).map(|c| (c, 0)).collect();
    for &c in &tally.counts {
        *buckets.get_mut(&c).expect("count cannot exceed task count") += 1;
    }
    Ok(VoteHistogram {
        n_tasks: t,
        buckets,
    })
}

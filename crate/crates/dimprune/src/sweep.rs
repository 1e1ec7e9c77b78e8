//! Grid experiments: strategy x sparsity x task count, one row per arm.
//!
//! Each arm builds a mask, bakes it into the model, evaluates the pooled
//! multiple-choice items and perplexity sequences of every task, and hard
//! prunes to get the compacted size. Profiling runs once per task and is
//! reused across the grid, so the expensive part scales with the task list
//! rather than the grid. Every arm is seeded; running the same sweep twice
//! yields identical rows.

use serde::{Deserialize, Serialize};

use crate::apply::apply_zero_mask;
use crate::corpus::{Record, TaskCorpus};
use crate::error::{Error, Result};
use crate::eval::{eval_mc, perplexity};
use crate::mask::{
    magnitude_dim_mask, merge_continuous, merge_votes, random_mask, GlobalMask,
    MaskProvenance,
};
use crate::model::ModelWeights;
use crate::profile::{profile_task, select_bottom, ImportanceVector, ProfileConfig};
use crate::prune::hard_prune;
use crate::synth::recovery_fraction;

/// What to run. Strategies that merge task profiles iterate over
/// `task_counts` prefixes of the task list; baselines ignore the tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub sparsities: Vec<f64>,
    pub strategies: Vec<MaskProvenance>,
    /// Prefix sizes of the task list for vote and continuous arms.
    #[serde(default)]
    pub task_counts: Vec<usize>,
    /// Sparsity of the per-task selectors in vote arms; defaults to the
    /// arm's target sparsity.
    #[serde(default)]
    pub selector_sparsity: Option<f64>,
    #[serde(default)]
    pub profile: ProfileConfig,
    /// One random-baseline arm per seed.
    #[serde(default)]
    pub random_seeds: Vec<u64>,
    /// Ground-truth dead dimensions, when the model is a planted one.
    #[serde(default)]
    pub planted_dims: Option<Vec<usize>>,
    /// Profiling sample caps to ablate in vote and continuous arms; a `null`
    /// entry means the full corpus. Empty means one arm at `profile`'s cap.
    #[serde(default)]
    pub sample_counts: Vec<Option<usize>>,
}

impl SweepConfig {
    pub fn validate(&self, n_tasks: usize) -> Result<()> {
        if self.sparsities.is_empty() {
            return Err(Error::Config("sweep needs at least one sparsity".into()));
        }
        for &s in &self.sparsities {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Config(format!("sparsity {s} outside [0, 1]")));
            }
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("sweep needs at least one strategy".into()));
        }
        if self.strategies.contains(&MaskProvenance::PerTask) {
            return Err(Error::Config(
                "per-task masks are a vote arm with task_counts = [1]".into(),
            ));
        }
        let merges = self
            .strategies
            .iter()
            .any(|s| matches!(s, MaskProvenance::Vote | MaskProvenance::Continuous));
        if merges {
            if self.task_counts.is_empty() {
                return Err(Error::Config(
                    "vote and continuous arms need task_counts".into(),
                ));
            }
            for &n in &self.task_counts {
                if n == 0 || n > n_tasks {
                    return Err(Error::Config(format!(
                        "task count {n} outside 1..={n_tasks}"
                    )));
                }
            }
        }
        if self.strategies.contains(&MaskProvenance::Random) && self.random_seeds.is_empty() {
            return Err(Error::Config("random arms need random_seeds".into()));
        }
        Ok(())
    }
}

/// One evaluated arm of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Strategy tag, or `dense` for the unpruned reference row.
    pub strategy: String,
    pub sparsity: f64,
    /// Tasks merged; 0 for task-free arms and the dense row.
    pub n_tasks: usize,
    /// Seed of a random arm.
    pub seed: Option<u64>,
    /// Profiling sample cap of a merge arm; absent means the full corpus
    /// (or an arm that never profiles).
    pub sample_cap: Option<usize>,
    pub d: usize,
    pub d_prime: usize,
    pub accuracy: f64,
    pub accuracy_norm: f64,
    pub perplexity: f64,
    /// Fraction of planted dead dimensions the mask found.
    pub recovery: Option<f64>,
    pub params_after: u64,
    pub flops_per_token_after: u64,
}

/// All rows of one sweep, dense reference first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
}

struct EvalPool {
    mc: TaskCorpus,
    sequences: Vec<Vec<u32>>,
}

fn build_pool(tasks: &[TaskCorpus]) -> Result<EvalPool> {
    let mut records = Vec::new();
    let mut sequences = Vec::new();
    for task in tasks {
        task.validate()?;
        sequences.extend(task.token_sequences());
        records.extend(
            task.records
                .iter()
                .filter(|r| matches!(r, Record::MultipleChoice { .. }))
                .cloned(),
        );
    }
    if records.is_empty() {
        return Err(Error::Input(
            "no multiple-choice records anywhere in the task list".into(),
        ));
    }
    Ok(EvalPool {
        mc: TaskCorpus::new("pooled", records)?,
        sequences,
    })
}

fn evaluate_arm(
    weights: &ModelWeights,
    pool: &EvalPool,
    mask: Option<&GlobalMask>,
    planted: Option<&[usize]>,
) -> Result<SweepRow> {
    let (model, d_prime, params_after, flops_after, recovery) = match mask {
        Some(mask) => {
            let masked = apply_zero_mask(weights, mask)?;
            let (_, report) = hard_prune(weights, mask, true)?;
            let recovery = planted
                .map(|dims| recovery_fraction(&mask.omit_indices, dims))
                .transpose()?;
            (
                masked,
                report.d_prime,
                report.params_after,
                report.flops_per_token_after,
                recovery,
            )
        }
        None => {
            let costs = crate::model::cost_report(&weights.config, weights.config.max_seq)?;
            (
                weights.clone(),
                weights.config.d,
                weights.param_count(),
                costs.flops_per_token,
                None,
            )
        }
    };
    let eval = eval_mc(&model, &pool.mc)?;
    let ppl = perplexity(&model, &pool.sequences)?;
    Ok(SweepRow {
        strategy: mask.map_or("dense".to_string(), |m| m.provenance.tag().to_string()),
        sparsity: mask.map_or(0.0, |m| m.sparsity),
        n_tasks: mask.map_or(0, |m| m.task_ids.len()),
        seed: None,
        sample_cap: None,
        d: weights.config.d,
        d_prime,
        accuracy: eval.accuracy,
        accuracy_norm: eval.accuracy_norm,
        perplexity: ppl.perplexity,
        recovery,
        params_after,
        flops_per_token_after: flops_after,
    })
}

/// Runs the whole grid. The dense reference row comes first; merge arms
/// follow in `sparsities x strategies x task_counts` order, then baselines.
pub fn run_sweep(
    weights: &ModelWeights,
    tasks: &[TaskCorpus],
    cfg: &SweepConfig,
) -> Result<SweepSummary> {
    weights.validate()?;
    cfg.validate(tasks.len())?;
    let pool = build_pool(tasks)?;

    let needs_profiles = cfg
        .strategies
        .iter()
        .any(|s| matches!(s, MaskProvenance::Vote | MaskProvenance::Continuous));
    let sample_counts: Vec<Option<usize>> = if cfg.sample_counts.is_empty() {
        vec![cfg.profile.n_samples]
    } else {
        cfg.sample_counts.clone()
    };
    let profiles_by_count: Vec<Vec<ImportanceVector>> = if needs_profiles {
        sample_counts
            .iter()
            .map(|&cap| {
                let pc = ProfileConfig {
                    n_samples: cap,
                    ..cfg.profile.clone()
                };
                tasks
                    .iter()
                    .map(|task| {
                        profile_task(weights, &task.token_sequences(), &task.task_id, &pc)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let mut rows = vec![evaluate_arm(weights, &pool, None, None)?];
    let planted = cfg.planted_dims.as_deref();
    for &s in &cfg.sparsities {
        for strategy in &cfg.strategies {
            match strategy {
                MaskProvenance::Vote => {
                    let sel_s = cfg.selector_sparsity.unwrap_or(s);
                    for &n in &cfg.task_counts {
                        for (ci, &cap) in sample_counts.iter().enumerate() {
                            let selectors = profiles_by_count[ci][..n]
                                .iter()
                                .map(|imp| select_bottom(imp, sel_s))
                                .collect::<Result<Vec<_>>>()?;
                            let mask = merge_votes(&selectors, s)?;
                            let mut row =
                                evaluate_arm(weights, &pool, Some(&mask), planted)?;
                            row.sample_cap = cap;
                            rows.push(row);
                        }
                    }
                }
                MaskProvenance::Continuous => {
                    for &n in &cfg.task_counts {
                        for (ci, &cap) in sample_counts.iter().enumerate() {
                            let mask = merge_continuous(&profiles_by_count[ci][..n], s)?;
                            let mut row =
                                evaluate_arm(weights, &pool, Some(&mask), planted)?;
                            row.sample_cap = cap;
                            rows.push(row);
                        }
                    }
                }
                MaskProvenance::Magnitude => {
                    let mask = magnitude_dim_mask(weights, s)?;
                    rows.push(evaluate_arm(weights, &pool, Some(&mask), planted)?);
                }
                MaskProvenance::Random => {
                    for &seed in &cfg.random_seeds {
                        let mask = random_mask(weights.config.d, s, seed)?;
                        let mut row = evaluate_arm(weights, &pool, Some(&mask), planted)?;
                        row.seed = Some(seed);
                        rows.push(row);
                    }
                }
                MaskProvenance::PerTask => unreachable!("rejected by validate"),
            }
        }
    }
    Ok(SweepSummary { rows })
}

/// Renders rows as CSV with a header, fit for spreadsheets.
pub fn rows_to_csv(rows: &[SweepRow]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| Error::Format(format!("csv rendering failed: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Format(format!("csv rendering failed: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(format!("csv is not utf-8: {e}")))
}

/// Renders rows as JSON Lines, one row object per line.
pub fn rows_to_jsonl(rows: &[SweepRow]) -> Result<String> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row)?);
        out.push('\n');
    }
    Ok(out)
}

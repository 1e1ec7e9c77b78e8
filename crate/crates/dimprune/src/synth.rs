//! Synthetic models with planted dead dimensions, and task corpora labeled
//! by the model itself.
//!
//! A planted model starts from a random initialization and then has a chosen
//! set of residual dimensions silenced end to end: their embedding columns
//! and their attention and MLP output rows are zeroed, so nothing ever
//! writes to them and their activations are exactly 0.0 rather than merely
//! small. Profiling such a model must score those dimensions at exactly
//! zero, which gives the whole pipeline a ground truth to recover. A second
//! set of dimensions can be amplified to sharpen the contrast between loud
//! and quiet parts of the stream.
//!
//! Corpora are random printable-ASCII strings. Multiple-choice items take
//! their gold label from the planted model's own length-normalized choice,
//! so the unpruned model scores a normalized accuracy of exactly 1.0 and
//! any later drop is attributable to pruning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Record, TaskCorpus};
use crate::error::{Error, Result};
use crate::eval::{score_item, ChoiceScore};
use crate::model::{build_model, ModelConfig, ModelWeights};

/// Geometry of a planted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub d: usize,
    pub n_blocks: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub vocab: usize,
    pub max_seq: usize,
    /// Dimensions silenced end to end; profiling scores them exactly 0.0.
    pub dead_dims: Vec<usize>,
    /// Dimensions whose output rows and embedding columns are boosted.
    pub signal_dims: Vec<usize>,
    /// Gain applied to the signal dimensions.
    pub amplification: f64,
}

impl PlantSpec {
    pub fn validate(&self) -> Result<()> {
        self.config()?;
        let check = |name: &str, dims: &[usize]| -> Result<()> {
            for &k in dims {
                if k >= self.d {
                    return Err(Error::Config(format!(
                        "{name} dimension {k} is out of range for d = {}",
                        self.d
                    )));
                }
            }
            for w in dims.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::Config(format!(
                        "{name} dimensions must be strictly ascending"
                    )));
                }
            }
            Ok(())
        };
        check("dead", &self.dead_dims)?;
        check("signal", &self.signal_dims)?;
        if self.dead_dims.iter().any(|k| self.signal_dims.contains(k)) {
            return Err(Error::Config(
                "dead and signal dimensions must be disjoint".into(),
            ));
        }
        if self.dead_dims.len() >= self.d {
            return Err(Error::Config(
                "at least one dimension must stay alive".into(),
            ));
        }
        if !self.amplification.is_finite() || self.amplification <= 0.0 {
            return Err(Error::Config(format!(
                "amplification must be a positive finite number, got {}",
                self.amplification
            )));
        }
        Ok(())
    }

    /// The model config this spec describes. Byte-tokenized corpora need
    /// `vocab >= 256`, which [`ModelConfig`] itself does not enforce.
    pub fn config(&self) -> Result<ModelConfig> {
        ModelConfig::new(
            self.d,
            self.n_blocks,
            self.n_heads,
            self.d_ff,
            self.vocab,
            self.max_seq,
        )
    }

    /// Fraction of the stream that is dead, the natural pruning target.
    #[must_use]
    pub fn dead_sparsity(&self) -> f64 {
        self.dead_dims.len() as f64 / self.d as f64
    }
}

/// Shape of the generated corpora.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_tasks: usize,
    /// Plain-text records per task.
    pub n_text: usize,
    /// Multiple-choice records per task.
    pub n_mc: usize,
    pub n_choices: usize,
    /// Bounds on the byte length of generated strings, inclusive.
    pub min_len: usize,
    pub max_len: usize,
}

impl CorpusSpec {
    pub fn validate(&self, config: &ModelConfig) -> Result<()> {
        if self.n_tasks == 0 {
            return Err(Error::Config("need at least one task".into()));
        }
        if self.n_text + self.n_mc == 0 {
            return Err(Error::Config(
                "each task needs at least one record".into(),
            ));
        }
        if self.n_mc > 0 && self.n_choices < 2 {
            return Err(Error::Config(
                "multiple choice needs at least two choices".into(),
            ));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::Config(format!(
                "string lengths [{}, {}] are not a valid range",
                self.min_len, self.max_len
            )));
        }
        if 2 * self.max_len > config.max_seq + 1 {
            return Err(Error::Config(format!(
                "context plus choice can reach {} tokens but max_seq is {}",
                2 * self.max_len,
                config.max_seq
            )));
        }
        Ok(())
    }
}

fn random_printable(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len)
        .map(|_| char::from(rng.gen_range(32u8..=126)))
        .collect()
}

/// Builds a random model, silences the dead dimensions, and amplifies the
/// signal dimensions. The result is the "dense" model of a planted
/// experiment; it validates like any other.
pub fn plant_model(spec: &PlantSpec, seed: u64) -> Result<ModelWeights> {
    spec.validate()?;
    let config = spec.config()?;
    let mut weights = build_model(&config, seed)?;
    for &k in &spec.dead_dims {
        weights.tok_embedding.zero_column(k);
        weights.pos_embedding.zero_column(k);
        for block in &mut weights.blocks {
            block.attn_o.weight.zero_row(k);
            block.mlp_out.weight.zero_row(k);
        }
    }
    for &k in &spec.signal_dims {
        weights.tok_embedding.scale_column(k, spec.amplification);
        for block in &mut weights.blocks {
            block.mlp_out.weight.scale_row(k, spec.amplification);
        }
    }
    weights.validate()?;
    Ok(weights)
}

fn norm_argmax(scores: &[ChoiceScore]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if s.normalized() > scores[best].normalized() {
            best = i;
        }
    }
    best
}

/// Generates task corpora of random strings. Gold labels come from the
/// model's own length-normalized argmax, so the model that labeled the data
/// scores `accuracy_norm = 1.0` on it by construction.
pub fn synth_tasks(
    weights: &ModelWeights,
    spec: &CorpusSpec,
    seed: u64,
) -> Result<Vec<TaskCorpus>> {
    weights.validate()?;
    spec.validate(&weights.config)?;
    crate::tokenizer::check_vocab(weights.config.vocab)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tasks = Vec::with_capacity(spec.n_tasks);
    for t in 0..spec.n_tasks {
        let mut records = Vec::with_capacity(spec.n_text + spec.n_mc);
        for _ in 0..spec.n_text {
            let len = rng.gen_range(spec.min_len..=spec.max_len);
            records.push(Record::Text {
                text: random_printable(&mut rng, len),
            });
        }
        for _ in 0..spec.n_mc {
            let ctx_len = rng.gen_range(spec.min_len..=spec.max_len);
            let context = random_printable(&mut rng, ctx_len);
            let choices: Vec<String> = (0..spec.n_choices)
                .map(|_| {
                    let len = rng.gen_range(spec.min_len..=spec.max_len);
                    random_printable(&mut rng, len)
                })
                .collect();
            let scores = score_item(weights, &context, &choices)?;
            records.push(Record::MultipleChoice {
                context,
                choices,
                gold: norm_argmax(&scores),
            });
        }
        tasks.push(TaskCorpus::new(format!("synth-{t:02}"), records)?);
    }
    Ok(tasks)
}

/// Fraction of the planted dimensions that a selection found.
pub fn recovery_fraction(selected: &[usize], planted: &[usize]) -> Result<f64> {
    if planted.is_empty() {
        return Err(Error::Input(
            "recovery is undefined without planted dimensions".into(),
        ));
    }
    let hits = planted.iter().filter(|k| selected.contains(k)).count();
    Ok(hits as f64 / planted.len() as f64)
}

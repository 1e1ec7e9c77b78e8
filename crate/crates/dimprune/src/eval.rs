//! Multiple-choice accuracy and perplexity under teacher forcing.
//!
//! A choice is scored by the summed log-probability of its tokens given the
//! context, read off one forward pass over `context + choice` (the final
//! token is never fed back in). Accuracy takes the raw argmax; normalized
//! accuracy divides each score by its choice's token count first, removing
//! the advantage short choices get from fewer log terms. All argmax ties
//! break toward the lower choice index.

use serde::{Deserialize, Serialize};

use crate::corpus::{Record, TaskCorpus};
use crate::error::{Error, Result};
use crate::model::{forward, ModelWeights};
use crate::tokenizer;

/// One scored choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceScore {
    /// Sum of the choice tokens' log-probabilities given the context.
    pub loglik: f64,
    pub n_continuation_tokens: usize,
}

impl ChoiceScore {
    /// Per-token log-probability.
    #[must_use]
    pub fn normalized(&self) -> f64 {
        self.loglik / self.n_continuation_tokens as f64
    }
}

/// Outcome of one multiple-choice item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemOutcome {
    pub gold: usize,
    pub pred: usize,
    pub pred_norm: usize,
    pub scores: Vec<ChoiceScore>,
}

/// Accuracy over one task's multiple-choice items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub task_id: String,
    pub n_items: usize,
    pub n_correct: usize,
    pub n_correct_norm: usize,
    pub accuracy: f64,
    pub accuracy_norm: f64,
    pub items: Vec<ItemOutcome>,
}

/// Perplexity over a bag of token sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerplexityReport {
    pub n_sequences: usize,
    /// Sequences of fewer than two tokens predict nothing and are skipped.
    pub n_skipped: usize,
    /// Predicted-token count, the denominator of `mean_nll`.
    pub n_tokens: u64,
    pub mean_nll: f64,
    pub perplexity: f64,
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_z = logits.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|&v| v - log_z).collect()
}

/// Summed log-probability of `continuation` following `context`, from one
/// forward pass over the concatenation minus its last token.
pub fn loglikelihood(
    weights: &ModelWeights,
    context: &[u32],
    continuation: &[u32],
) -> Result<f64> {
    if context.is_empty() {
        return Err(Error::Input("loglikelihood needs a non-empty context".into()));
    }
    if continuation.is_empty() {
        return Err(Error::Input(
            "loglikelihood needs a non-empty continuation".into(),
        ));
    }
    let full: Vec<u32> = context.iter().chain(continuation).copied().collect();
    let (logits, _) = forward(weights, &full[..full.len() - 1], false)?;
    let mut total = 0.0;
    for (offset, &token) in continuation.iter().enumerate() {
        let pos = context.len() - 1 + offset;
        let lp = log_softmax(logits.row(pos));
        total += lp[token as usize];
    }
    Ok(total)
}

/// Scores every choice of one item against a shared context.
pub fn score_item(
    weights: &ModelWeights,
    context: &str,
    choices: &[String],
) -> Result<Vec<ChoiceScore>> {
    let context_tokens = tokenizer::tokenize(context);
    let mut scores = Vec::with_capacity(choices.len());
    for choice in choices {
        let continuation = tokenizer::tokenize(choice);
        let loglik = loglikelihood(weights, &context_tokens, &continuation)?;
        scores.push(ChoiceScore {
            loglik,
            n_continuation_tokens: continuation.len(),
        });
    }
    Ok(scores)
}

fn argmax_by<F: Fn(&ChoiceScore) -> f64>(scores: &[ChoiceScore], key: F) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if key(s) > key(&scores[best]) {
            best = i;
        }
    }
    best
}

/// Evaluates every multiple-choice record in the corpus. Plain-text records
/// are ignored; a corpus without any multiple-choice records is an error.
pub fn eval_mc(weights: &ModelWeights, corpus: &TaskCorpus) -> Result<EvalResult> {
    corpus.validate()?;
    tokenizer::check_vocab(weights.config.vocab)?;
    let mut items = Vec::new();
    for record in &corpus.records {
        if let Record::MultipleChoice {
            context,
            choices,
            gold,
        } = record
        {
            let scores = score_item(weights, context, choices)?;
            let pred = argmax_by(&scores, |s| s.loglik);
            let pred_norm = argmax_by(&scores, ChoiceScore::normalized);
            items.push(ItemOutcome {
                gold: *gold,
                pred,
                pred_norm,
                scores,
            });
        }
    }
    if items.is_empty() {
        return Err(Error::Input(format!(
            "corpus {} has no multiple-choice records to evaluate",
            corpus.task_id
        )));
    }
    let n_items = items.len();
    let n_correct = items.iter().filter(|it| it.pred == it.gold).count();
    let n_correct_norm = items.iter().filter(|it| it.pred_norm == it.gold).count();
    Ok(EvalResult {
        task_id: corpus.task_id.clone(),
        n_items,
        n_correct,
        n_correct_norm,
        accuracy: n_correct as f64 / n_items as f64,
        accuracy_norm: n_correct_norm as f64 / n_items as f64,
        items,
    })
}

/// Teacher-forced perplexity over token sequences: `exp` of the mean
/// negative log-probability across all predicted tokens.
pub fn perplexity(weights: &ModelWeights, sequences: &[Vec<u32>]) -> Result<PerplexityReport> {
    let mut total_nll = 0.0;
    let mut n_tokens = 0u64;
    let mut n_skipped = 0usize;
    for seq in sequences {
        if seq.len() < 2 {
            n_skipped += 1;
            continue;
        }
        let (logits, _) = forward(weights, &seq[..seq.len() - 1], false)?;
        for pos in 0..seq.len() - 1 {
            let lp = log_softmax(logits.row(pos));
            total_nll -= lp[seq[pos + 1] as usize];
            n_tokens += 1;
        }
    }
    if n_tokens == 0 {
        return Err(Error::Degenerate(
            "no sequence long enough to predict a token".into(),
        ));
    }
    let mean_nll = total_nll / n_tokens as f64;
    Ok(PerplexityReport {
        n_sequences: sequences.len(),
        n_skipped,
        n_tokens,
        mean_nll,
        perplexity: mean_nll.exp(),
    })
}

/// Tokenizes every record the way profiling does: plain text as-is, and
/// multiple-choice items as context followed by the gold choice.
#[must_use]
pub fn perplexity_sequences(corpus: &TaskCorpus) -> Vec<Vec<u32>> {
    corpus.token_sequences()
}

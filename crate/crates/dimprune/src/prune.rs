//! Hard pruning: physically removing the omitted residual dimensions.
//!
//! Where zero-masking leaves shapes alone, this module slices the kept rows
//! and columns out of every tensor, shrinking the residual stream from `d`
//! to `d'` while the attention inner width and the MLP hidden width stay
//! put. Layers that read the residual keep only the surviving columns and
//! are multiplied by the variance correction `alpha = sqrt(d / d')`, which
//! compensates RMSNorm computing its mean over `d'` instead of `d` terms.
//! Layers that write the residual keep only the surviving rows and are
//! never rescaled. With `norm_eps = 0` the correction is exact and the
//! compacted model reproduces the masked model's logits to roundoff.

use serde::{Deserialize, Serialize};

use crate::container::PruneStamp;
use crate::error::{Error, Result};
use crate::mask::GlobalMask;
use crate::model::{cost_report, Linear, ModelConfig, ModelWeights};

/// `alpha = sqrt(d / d_prime)`, the factor that keeps RMSNorm outputs on the
/// kept coordinates unchanged after the stream narrows.
pub fn variance_scale(d: usize, d_prime: usize) -> Result<f64> {
    if d_prime == 0 {
        return Err(Error::Degenerate(
            "cannot prune every residual dimension".into(),
        ));
    }
    if d_prime > d {
        return Err(Error::Consistency(format!(
            "kept width {d_prime} exceeds original width {d}"
        )));
    }
    Ok((d as f64 / d_prime as f64).sqrt())
}

/// Shape change of one tensor, for the prune report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShapeDelta {
    pub name: String,
    pub shape_before: Vec<usize>,
    pub shape_after: Vec<usize>,
}

/// What a hard prune did to the model's size and cost. FLOPs and peak
/// activation bytes are quoted for a full-length sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub d_original: usize,
    pub d_prime: usize,
    /// Scale folded into residual-reading weights; 1.0 when rescaling was off.
    pub alpha: f64,
    /// True when a tied head had to be split into its own tensor because the
    /// head needs `alpha` and the embedding must not have it.
    pub untied_head: bool,
    pub params_before: u64,
    pub params_after: u64,
    pub flops_per_token_before: u64,
    pub flops_per_token_after: u64,
    pub peak_activation_bytes_before: u64,
    pub peak_activation_bytes_after: u64,
    pub reference_seq_len: usize,
    pub layer_deltas: Vec<LayerShapeDelta>,
}

impl PruneReport {
    /// The stamp to store alongside the compacted weights.
    #[must_use]
    pub fn stamp(&self, mask: &GlobalMask) -> PruneStamp {
        PruneStamp {
            d_original: self.d_original,
            d_prime: self.d_prime,
            alpha: self.alpha,
            mask: mask.clone(),
        }
    }
}

struct DeltaLog {
    deltas: Vec<LayerShapeDelta>,
}

impl DeltaLog {
    fn mat(&mut self, name: String, before: (usize, usize), after: (usize, usize)) {
        self.deltas.push(LayerShapeDelta {
            name,
            shape_before: vec![before.0, before.1],
            shape_after: vec![after.0, after.1],
        });
    }

    fn vec(&mut self, name: String, before: usize, after: usize) {
        self.deltas.push(LayerShapeDelta {
            name,
            shape_before: vec![before],
            shape_after: vec![after],
        });
    }
}

fn slice_input_columns(lin: &Linear, kept: &[usize], scale: f64) -> Linear {
    let mut weight = lin.weight.select_columns(kept);
    if scale != 1.0 {
        weight.scale_in_place(scale);
    }
    Linear {
        weight,
        bias: lin.bias.clone(),
    }
}

fn slice_output_rows(lin: &Linear, kept: &[usize]) -> Linear {
    Linear {
        weight: lin.weight.select_rows(kept),
        bias: lin
            .bias
            .as_ref()
            .map(|b| kept.iter().map(|&k| b[k]).collect()),
    }
}

fn slice_gains(gains: &[f64], kept: &[usize]) -> Vec<f64> {
    kept.iter().map(|&k| gains[k]).collect()
}

/// Removes the mask's dimensions from every tensor. With `rescale` on, the
/// variance correction is folded into residual-reading weights; a tied head
/// is split off in that case so the embedding table stays unscaled.
pub fn hard_prune(
    weights: &ModelWeights,
    mask: &GlobalMask,
    rescale: bool,
) -> Result<(ModelWeights, PruneReport)> {
    weights.validate()?;
    mask.validate()?;
    let config = &weights.config;
    if mask.d != config.d {
        return Err(Error::Consistency(format!(
            "mask is over d = {} but the model has d = {}",
            mask.d, config.d
        )));
    }
    let kept = mask.kept_indices();
    let d_prime = kept.len();
    let alpha = if rescale {
        variance_scale(config.d, d_prime)?
    } else {
        variance_scale(config.d, d_prime)?;
        1.0
    };
    let untie = config.tie_lm_head && alpha != 1.0;

    let mut log = DeltaLog { deltas: Vec::new() };
    let d = config.d;

    let tok_embedding = weights.tok_embedding.select_columns(&kept);
    log.mat(
        "tok_embedding".into(),
        (config.vocab, d),
        (config.vocab, d_prime),
    );
    let pos_embedding = weights.pos_embedding.select_columns(&kept);
    log.mat(
        "pos_embedding".into(),
        (config.max_seq, d),
        (config.max_seq, d_prime),
    );

    let inner = config.inner_width();
    let mut blocks = Vec::with_capacity(config.n_blocks);
    for (i, b) in weights.blocks.iter().enumerate() {
        let norm1_w = slice_gains(&b.norm1_w, &kept);
        log.vec(format!("blocks.{i}.norm1_w"), d, d_prime);
        let attn_q = slice_input_columns(&b.attn_q, &kept, alpha);
        log.mat(format!("blocks.{i}.attn_q"), (inner, d), (inner, d_prime));
        let attn_k = slice_input_columns(&b.attn_k, &kept, alpha);
        log.mat(format!("blocks.{i}.attn_k"), (inner, d), (inner, d_prime));
        let attn_v = slice_input_columns(&b.attn_v, &kept, alpha);
        log.mat(format!("blocks.{i}.attn_v"), (inner, d), (inner, d_prime));
        let attn_o = slice_output_rows(&b.attn_o, &kept);
        log.mat(format!("blocks.{i}.attn_o"), (d, inner), (d_prime, inner));
        let norm2_w = slice_gains(&b.norm2_w, &kept);
        log.vec(format!("blocks.{i}.norm2_w"), d, d_prime);
        let mlp_in = slice_input_columns(&b.mlp_in, &kept, alpha);
        log.mat(format!("blocks.{i}.mlp_in"), (config.d_ff, d), (config.d_ff, d_prime));
        let mlp_out = slice_output_rows(&b.mlp_out, &kept);
        log.mat(format!("blocks.{i}.mlp_out"), (d, config.d_ff), (d_prime, config.d_ff));
        blocks.push(crate::model::BlockWeights {
            norm1_w,
            attn_q,
            attn_k,
            attn_v,
            attn_o,
            norm2_w,
            mlp_in,
            mlp_out,
        });
    }

    let final_norm_w = slice_gains(&weights.final_norm_w, &kept);
    log.vec("final_norm_w".into(), d, d_prime);

    let lm_head = match (&weights.lm_head, untie) {
        (Some(head), _) => {
            log.mat("lm_head".into(), (config.vocab, d), (config.vocab, d_prime));
            Some(slice_input_columns(head, &kept, alpha))
        }
        (None, true) => {
            log.mat("lm_head".into(), (config.vocab, d), (config.vocab, d_prime));
            let mut weight = weights.tok_embedding.select_columns(&kept);
            weight.scale_in_place(alpha);
            Some(Linear { weight, bias: None })
        }
        (None, false) => None,
    };

    let new_config = ModelConfig {
        d: d_prime,
        tie_lm_head: config.tie_lm_head && !untie,
        ..config.clone()
    };
    let pruned = ModelWeights {
        config: new_config.clone(),
        tok_embedding,
        pos_embedding,
        blocks,
        final_norm_w,
        lm_head,
    };
    pruned.validate()?;

    let reference_seq_len = config.max_seq;
    let before = cost_report(config, reference_seq_len)?;
    let after = cost_report(&new_config, reference_seq_len)?;
    let report = PruneReport {
        d_original: d,
        d_prime,
        alpha,
        untied_head: untie,
        params_before: weights.param_count(),
        params_after: pruned.param_count(),
        flops_per_token_before: before.flops_per_token,
        flops_per_token_after: after.flops_per_token,
        peak_activation_bytes_before: before.peak_activation_bytes,
        peak_activation_bytes_after: after.peak_activation_bytes,
        reference_seq_len,
        layer_deltas: log.deltas,
    };
    Ok((pruned, report))
}

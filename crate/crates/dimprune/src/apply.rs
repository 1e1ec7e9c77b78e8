//! Baking a global mask into model weights as exact zeros.
//!
//! Every tensor that touches the residual stream falls into one of four
//! roles, and the role decides which slice gets zeroed:
//!
//! * input-dim layers read the residual, so their columns at omitted
//!   dimensions go to zero and their bias stays;
//! * output-dim layers write the residual, so their rows and the matching
//!   bias entries go to zero;
//! * residual writers (the embedding tables) lose the omitted columns of
//!   their d axis;
//! * norm gain vectors are zeroed elementwise.
//!
//! With all writers silenced, the omitted residual coordinates are exactly
//! 0.0 at every layer of a forward pass, not merely small.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::GlobalMask;
use crate::model::{Linear, ModelConfig, ModelWeights};

/// Which slice of a tensor a mask removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskRole {
    /// Reads the residual: columns are zeroed, bias is untouched.
    InputDim,
    /// Writes the residual: rows and bias entries are zeroed.
    OutputDim,
    /// Produces the initial residual: d-axis columns are zeroed.
    ResidualWriter,
    /// Elementwise gain on the residual: entries are zeroed.
    NormVector,
}

/// One maskable tensor and how the mask lands on it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SublayerRole {
    pub name: String,
    pub role: MaskRole,
}

/// Enumerates every maskable tensor in config order. A tied head has no
/// tensor of its own; its masking rides on the embedding's columns.
#[must_use]
pub fn classify_sublayers(config: &ModelConfig) -> Vec<SublayerRole> {
    let entry = |name: String, role| SublayerRole { name, role };
    let mut out = vec![
        entry("tok_embedding".into(), MaskRole::ResidualWriter),
        entry("pos_embedding".into(), MaskRole::ResidualWriter),
    ];
    for i in 0..config.n_blocks {
        out.push(entry(format!("blocks.{i}.norm1_w"), MaskRole::NormVector));
        out.push(entry(format!("blocks.{i}.attn_q"), MaskRole::InputDim));
        out.push(entry(format!("blocks.{i}.attn_k"), MaskRole::InputDim));
        out.push(entry(format!("blocks.{i}.attn_v"), MaskRole::InputDim));
        out.push(entry(format!("blocks.{i}.attn_o"), MaskRole::OutputDim));
        out.push(entry(format!("blocks.{i}.norm2_w"), MaskRole::NormVector));
        out.push(entry(format!("blocks.{i}.mlp_in"), MaskRole::InputDim));
        out.push(entry(format!("blocks.{i}.mlp_out"), MaskRole::OutputDim));
    }
    out.push(entry("final_norm_w".into(), MaskRole::NormVector));
    if !config.tie_lm_head {
        out.push(entry("lm_head".into(), MaskRole::InputDim));
    }
    out
}

fn zero_input_columns(lin: &mut Linear, omit: &[usize]) {
    for &k in omit {
        lin.weight.zero_column(k);
    }
}

fn zero_output_rows(lin: &mut Linear, omit: &[usize]) {
    for &k in omit {
        lin.weight.zero_row(k);
        if let Some(bias) = &mut lin.bias {
            bias[k] = 0.0;
        }
    }
}

/// Returns a copy of the model with the mask's zeros baked in. Shapes and
/// parameter counts are unchanged; only values move.
pub fn apply_zero_mask(weights: &ModelWeights, mask: &GlobalMask) -> Result<ModelWeights> {
    weights.validate()?;
    mask.validate()?;
    if mask.d != weights.config.d {
        return Err(Error::Consistency(format!(
            "mask is over d = {} but the model has d = {}",
            mask.d, weights.config.d
        )));
    }
    let omit = &mask.omit_indices;
    let mut out = weights.clone();
    for &k in omit {
        out.tok_embedding.zero_column(k);
        out.pos_embedding.zero_column(k);
        out.final_norm_w[k] = 0.0;
    }
    for block in &mut out.blocks {
        for &k in omit {
            block.norm1_w[k] = 0.0;
            block.norm2_w[k] = 0.0;
        }
        zero_input_columns(&mut block.attn_q, omit);
        zero_input_columns(&mut block.attn_k, omit);
        zero_input_columns(&mut block.attn_v, omit);
        zero_input_columns(&mut block.mlp_in, omit);
        zero_output_rows(&mut block.attn_o, omit);
        zero_output_rows(&mut block.mlp_out, omit);
    }
    if let Some(head) = &mut out.lm_head {
        zero_input_columns(head, omit);
    }
    Ok(out)
}

fn check_zero_columns(name: &str, lin: &Linear, omit: &[usize]) -> Result<()> {
    for &k in omit {
        for r in 0..lin.weight.rows() {
            if lin.weight.get(r, k) != 0.0 {
                return Err(Error::Consistency(format!(
                    "{name} column {k} row {r} is {}, expected exact zero",
                    lin.weight.get(r, k)
                )));
            }
        }
    }
    Ok(())
}

fn check_zero_rows(name: &str, lin: &Linear, omit: &[usize]) -> Result<()> {
    for &k in omit {
        if lin.weight.row(k).iter().any(|&v| v != 0.0) {
            return Err(Error::Consistency(format!(
                "{name} row {k} is not exactly zero"
            )));
        }
        if let Some(bias) = &lin.bias {
            if bias[k] != 0.0 {
                return Err(Error::Consistency(format!(
                    "{name} bias entry {k} is {}, expected exact zero",
                    bias[k]
                )));
            }
        }
    }
    Ok(())
}

/// Verifies that every zero the mask demands is present in the weights.
/// Passing this plus [`ModelWeights::validate`] means the file on disk really
/// is the masked model it claims to be.
pub fn assert_mask_applied(weights: &ModelWeights, mask: &GlobalMask) -> Result<()> {
    weights.validate()?;
    mask.validate()?;
    if mask.d != weights.config.d {
        return Err(Error::Consistency(format!(
            "mask is over d = {} but the model has d = {}",
            mask.d, weights.config.d
        )));
    }
    let omit = &mask.omit_indices;
    for &k in omit {
        for v in 0..weights.tok_embedding.rows() {
            if weights.tok_embedding.get(v, k) != 0.0 {
                return Err(Error::Consistency(format!(
                    "tok_embedding column {k} is not exactly zero"
                )));
            }
        }
        for p in 0..weights.pos_embedding.rows() {
            if weights.pos_embedding.get(p, k) != 0.0 {
                return Err(Error::Consistency(format!(
                    "pos_embedding column {k} is not exactly zero"
                )));
            }
        }
        if weights.final_norm_w[k] != 0.0 {
            return Err(Error::Consistency(format!(
                "final_norm_w[{k}] is not exactly zero"
            )));
        }
    }
    for (i, block) in weights.blocks.iter().enumerate() {
        for &k in omit {
            if block.norm1_w[k] != 0.0 || block.norm2_w[k] != 0.0 {
                return Err(Error::Consistency(format!(
                    "block {i} norm gain {k} is not exactly zero"
                )));
            }
        }
        check_zero_columns(&format!("blocks.{i}.attn_q"), &block.attn_q, omit)?;
        check_zero_columns(&format!("blocks.{i}.attn_k"), &block.attn_k, omit)?;
        check_zero_columns(&format!("blocks.{i}.attn_v"), &block.attn_v, omit)?;
        check_zero_columns(&format!("blocks.{i}.mlp_in"), &block.mlp_in, omit)?;
        check_zero_rows(&format!("blocks.{i}.attn_o"), &block.attn_o, omit)?;
        check_zero_rows(&format!("blocks.{i}.mlp_out"), &block.mlp_out, omit)?;
    }
    if let Some(head) = &weights.lm_head {
        check_zero_columns("lm_head", head, omit)?;
    }
    Ok(())
}

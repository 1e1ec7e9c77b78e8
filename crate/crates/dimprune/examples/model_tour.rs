//! Build a small decoder-only model, run one forward pass, and read the
//! shapes, costs, and activation trace it produces.
//!
//! Run with `cargo run --example model_tour`.

use dimprune::model::{build_model, cost_report, forward, ModelConfig};
use dimprune::tokenizer::{detokenize, tokenize};

fn main() -> dimprune::Result<()> {
    let config = ModelConfig::new(32, 2, 4, 64, 260, 64)?;
    println!(
        "config: d={} blocks={} heads={} (head_dim {}) d_ff={} vocab={} max_seq={}",
        config.d, config.n_blocks, config.n_heads, config.head_dim, config.d_ff,
        config.vocab, config.max_seq
    );

    let weights = build_model(&config, 7)?;
    println!("built {} parameters from seed 7", weights.param_count());

    let cost = cost_report(&config, 16)?;
    println!(
        "at 16 tokens: {} flops/token, {} peak activation bytes",
        cost.flops_per_token, cost.peak_activation_bytes
    );

    let prompt = "the quick brown fox";
    let tokens = tokenize(prompt);
    println!("\nprompt {prompt:?} -> {} byte tokens", tokens.len());

    let (logits, trace) = forward(&weights, &tokens, true)?;
    let (rows, cols) = logits.shape();
    println!("logits are [{rows} x {cols}]: one row per position, one column per token id");

    let last = logits.row(rows - 1);
    let mut best = 0;
    for (t, &v) in last.iter().enumerate() {
        if v > last[best] {
            best = t;
        }
    }
    println!(
        "most likely next token: id {best} ({:?})",
        detokenize(&[best as u32]).unwrap_or_else(|_| "<special>".into())
    );

    let trace = trace.expect("capture was requested");
    println!("\ntrace over {} positions:", trace.valid_token_count);
    println!("  embed                {:?}", trace.embed.shape());
    for b in 0..config.n_blocks {
        println!(
            "  block {b}: resid after attn {:?}, after mlp {:?}, mlp out {:?}",
            trace.resid_after_attn[b].shape(),
            trace.resid_after_mlp[b].shape(),
            trace.mlp_out[b].shape()
        );
    }
    println!("every stage keeps the residual stream at width d = {}", config.d);
    Ok(())
}

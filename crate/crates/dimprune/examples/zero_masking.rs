//! Bake a mask's zeros into a model without changing any tensor shape, and
//! watch the omitted residual coordinates go exactly to zero.
//!
//! Run with `cargo run --example zero_masking`.

use dimprune::apply::{apply_zero_mask, assert_mask_applied, classify_sublayers};
use dimprune::mask::random_mask;
use dimprune::model::{build_model, forward, ModelConfig};

fn main() -> dimprune::Result<()> {
    let config = ModelConfig::new(24, 2, 2, 32, 270, 32)?;
    let weights = build_model(&config, 3)?;
    let mask = random_mask(config.d, 0.25, 11)?;
    println!("masking dimensions {:?} of d={}", mask.omit_indices, mask.d);

    println!("\nwhat each sublayer does about a masked dimension:");
    for role in classify_sublayers(&config).iter().take(9) {
        println!("  {:<22} {:?}", role.name, role.role);
    }
    println!("  ... and so on for every block");

    let masked = apply_zero_mask(&weights, &mask)?;
    assert_mask_applied(&masked, &mask)?;
    println!("\nall masked rows, columns, biases, and gains verified zero");

    let tokens: Vec<u32> = (0..16).map(|t| (t * 13) % 256).collect();
    let (_, trace) = forward(&masked, &tokens, true)?;
    let trace = trace.expect("capture was requested");
    let k = mask.omit_indices[0];
    let alive = *mask.kept_indices().first().expect("mask keeps something");
    println!("\nresidual stream at position 5, dim {k} (masked) vs dim {alive} (kept):");
    println!("  after embedding: {:>10.6} vs {:>10.6}", trace.embed.get(5, k), trace.embed.get(5, alive));
    for b in 0..config.n_blocks {
        println!(
            "  after block {b}:   {:>10.6} vs {:>10.6}",
            trace.resid_after_mlp[b].get(5, k),
            trace.resid_after_mlp[b].get(5, alive)
        );
    }

    let (dense_logits, _) = forward(&weights, &tokens, false)?;
    let (masked_logits, _) = forward(&masked, &tokens, false)?;
    println!(
        "\nlogits moved by up to {:.4} against the dense model; shapes are unchanged",
        dense_logits.max_abs_diff(&masked_logits)
    );
    Ok(())
}

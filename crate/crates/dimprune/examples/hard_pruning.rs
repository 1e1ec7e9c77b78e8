//! Physically remove masked dimensions, compare the compacted model's
//! logits against the zero-masked reference, and round-trip the result
//! through the container format with its prune stamp.
//!
//! Run with `cargo run --example hard_pruning`.

use dimprune::apply::apply_zero_mask;
use dimprune::container::{load_model, save_model, ModelMeta};
use dimprune::mask::random_mask;
use dimprune::model::{build_model, forward, ModelConfig};
use dimprune::prune::hard_prune;

fn main() -> dimprune::Result<()> {
    let config = ModelConfig::new(32, 2, 4, 48, 280, 32)?;
    let weights = build_model(&config, 5)?;
    let mask = random_mask(config.d, 0.25, 17)?;
    println!("pruning {} of {} dimensions", mask.omit_indices.len(), mask.d);

    let (pruned, report) = hard_prune(&weights, &mask, true)?;
    println!(
        "d {} -> {}, alpha = {:.6}, params {} -> {}, flops/token {} -> {}",
        report.d_original, report.d_prime, report.alpha, report.params_before,
        report.params_after, report.flops_per_token_before, report.flops_per_token_after
    );
    println!("\nfirst few tensor shape changes:");
    for delta in report.layer_deltas.iter().take(5) {
        println!(
            "  {:<22} {:?} -> {:?}",
            delta.name, delta.shape_before, delta.shape_after
        );
    }

    // The rescale folds sqrt(d/d') into every residual-reading weight so
    // the narrower normalization denominator cancels out.
    let masked = apply_zero_mask(&weights, &mask)?;
    let tokens: Vec<u32> = (0..20).map(|t| (t * 31) % 256).collect();
    let (masked_logits, _) = forward(&masked, &tokens, false)?;
    let (pruned_logits, _) = forward(&pruned, &tokens, false)?;
    let gap = masked_logits.max_abs_diff(&pruned_logits) / masked_logits.max_abs();
    println!("\nrelative logit gap vs the zero-masked model: {gap:.3e}");

    let (plain, _) = hard_prune(&weights, &mask, false)?;
    let (plain_logits, _) = forward(&plain, &tokens, false)?;
    let plain_gap = masked_logits.max_abs_diff(&plain_logits) / masked_logits.max_abs();
    println!("without the variance correction it grows to {plain_gap:.3e}");

    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("pruned.bin");
    let meta = ModelMeta {
        prune: Some(report.stamp(&mask)),
        ..ModelMeta::plain()
    };
    save_model(&path, &pruned, &meta)?;
    let (reloaded, meta) = load_model(&path)?;
    let stamp = meta.prune.expect("stamp was saved");
    println!(
        "\nround-tripped through {:?}: d' = {}, stamped alpha matches: {}",
        path.file_name().unwrap(),
        reloaded.config.d,
        stamp.alpha == report.alpha
    );
    Ok(())
}

//! Time forward passes before and after hard pruning and compare the
//! measured wall clock with the analytic cost figures.
//!
//! Run with `cargo run --example benchmarking`.

use dimprune::bench::run_bench;
use dimprune::mask::random_mask;
use dimprune::model::{build_model, ModelConfig};
use dimprune::prune::hard_prune;

fn main() -> dimprune::Result<()> {
    let config = ModelConfig::new(48, 3, 4, 96, 280, 64)?;
    let weights = build_model(&config, 5)?;
    let mask = random_mask(config.d, 0.5, 13)?;
    let (pruned, report) = hard_prune(&weights, &mask, true)?;
    println!(
        "halving the residual stream: d {} -> {}",
        report.d_original, report.d_prime
    );

    let seq_len = 48;
    let dense = run_bench(&weights, seq_len, 2, 8, 7)?;
    let compact = run_bench(&pruned, seq_len, 2, 8, 7)?;

    println!("\n{:<26} {:>12} {:>12}", "", "dense", "pruned");
    let row = |label: &str, a: String, b: String| println!("{label:<26} {a:>12} {b:>12}");
    row("wall ms (median)", format!("{:.3}", dense.wall_ms_median), format!("{:.3}", compact.wall_ms_median));
    row("wall ms (mean +/- sd)",
        format!("{:.2}+/-{:.2}", dense.wall_ms_mean, dense.wall_ms_stddev),
        format!("{:.2}+/-{:.2}", compact.wall_ms_mean, compact.wall_ms_stddev));
    row("tokens / second", format!("{:.0}", dense.tokens_per_second), format!("{:.0}", compact.tokens_per_second));
    row("parameters", dense.param_count.to_string(), compact.param_count.to_string());
    row("flops / token", dense.flops_per_token.to_string(), compact.flops_per_token.to_string());
    row("peak activation bytes", dense.peak_activation_bytes.to_string(), compact.peak_activation_bytes.to_string());

    let flop_ratio = compact.flops_per_token as f64 / dense.flops_per_token as f64;
    let wall_ratio = compact.wall_ms_median / dense.wall_ms_median;
    println!(
        "\nanalytic flops fall to {:.0}% and measured wall time to {:.0}%; the two need not \
         match exactly because attention's inner width keeps the original d",
        flop_ratio * 100.0,
        wall_ratio * 100.0
    );
    Ok(())
}

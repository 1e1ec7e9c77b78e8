//! Profile one task's activations and cut a per-task selector from the
//! importance scores.
//!
//! The fixture plants four structurally silent dimensions, so their mean
//! absolute activation is exactly zero and the bottom cut finds them.
//!
//! Run with `cargo run --example profile_importance`.

use dimprune::profile::{profile_task, select_bottom, ProfileConfig};
use dimprune::synth::{plant_model, synth_tasks, CorpusSpec, PlantSpec};

fn main() -> dimprune::Result<()> {
    let spec = PlantSpec {
        d: 16,
        n_blocks: 2,
        n_heads: 2,
        d_ff: 24,
        vocab: 260,
        max_seq: 64,
        dead_dims: vec![3, 7, 10, 14],
        signal_dims: vec![0, 5],
        amplification: 4.0,
    };
    let weights = plant_model(&spec, 1)?;
    let corpus_spec = CorpusSpec {
        n_tasks: 1,
        n_text: 12,
        n_mc: 0,
        n_choices: 2,
        min_len: 8,
        max_len: 24,
    };
    let task = synth_tasks(&weights, &corpus_spec, 2)?.remove(0);
    println!(
        "planted dead dimensions {:?}, task {:?} with {} records",
        spec.dead_dims,
        task.task_id,
        task.records.len()
    );

    let cfg = ProfileConfig {
        n_samples: None,
        seed: 42,
        max_tokens_per_sample: 512,
    };
    let importance = profile_task(&weights, &task.token_sequences(), &task.task_id, &cfg)?;
    println!(
        "profiled {} samples, {} tokens",
        importance.n_samples, importance.n_tokens
    );

    let mut ranked: Vec<(usize, f64)> = importance.scores.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
    println!("\nquietest dimensions (mean |mlp output| per token):");
    for &(k, score) in ranked.iter().take(6) {
        println!("  dim {k:>2}: {score:.6}");
    }

    let selector = select_bottom(&importance, 0.25)?;
    println!(
        "\nselector at sparsity 0.25 votes to prune {:?} ({} of {} dims)",
        selector.indices,
        selector.popcount(),
        selector.d
    );
    assert_eq!(selector.indices, spec.dead_dims);
    println!("the selector recovered the planted set exactly");
    Ok(())
}

//! End-to-end ground-truth check: plant silent dimensions, run the full
//! profile-select-merge pipeline, and confirm it returns exactly the
//! planted set.
//!
//! Run with `cargo run --example planted_recovery`.

use dimprune::mask::merge_votes;
use dimprune::profile::{profile_task, select_bottom, ProfileConfig};
use dimprune::synth::{plant_model, recovery_fraction, synth_tasks, CorpusSpec, PlantSpec};

fn main() -> dimprune::Result<()> {
    let spec = PlantSpec {
        d: 40,
        n_blocks: 2,
        n_heads: 2,
        d_ff: 48,
        vocab: 260,
        max_seq: 48,
        dead_dims: vec![2, 9, 15, 21, 26, 30, 33, 38],
        signal_dims: vec![0, 11, 24],
        amplification: 4.0,
    };
    let sparsity = spec.dead_sparsity();
    println!(
        "planted {} dead dims of d={} (sparsity {sparsity})",
        spec.dead_dims.len(),
        spec.d
    );

    let weights = plant_model(&spec, 8)?;
    let corpus_spec = CorpusSpec {
        n_tasks: 4,
        n_text: 12,
        n_mc: 0,
        n_choices: 2,
        min_len: 8,
        max_len: 20,
    };
    let tasks = synth_tasks(&weights, &corpus_spec, 9)?;

    let cfg = ProfileConfig {
        n_samples: None,
        seed: 42,
        max_tokens_per_sample: 512,
    };
    let mut selectors = Vec::new();
    for task in &tasks {
        let importance = profile_task(&weights, &task.token_sequences(), &task.task_id, &cfg)?;
        let selector = select_bottom(&importance, sparsity)?;
        let hits = recovery_fraction(&selector.indices, &spec.dead_dims)?;
        println!(
            "  task {} selected {:?} (recovery {hits})",
            task.task_id, selector.indices
        );
        selectors.push(selector);
    }

    let mask = merge_votes(&selectors, sparsity)?;
    let recovery = recovery_fraction(&mask.omit_indices, &spec.dead_dims)?;
    println!("\nmerged mask omits {:?}", mask.omit_indices);
    println!("recovery fraction: {recovery}");
    assert_eq!(mask.omit_indices, spec.dead_dims);
    println!("the pipeline recovered the planted set exactly");
    Ok(())
}

//! Merge several tasks' profiles into one global mask, four ways: majority
//! vote, continuous score averaging, weight magnitude, and a seeded random
//! baseline.
//!
//! Run with `cargo run --example merge_strategies`.

use dimprune::mask::{
    magnitude_dim_mask, merge_continuous, merge_votes, random_mask, tally_votes, vote_histogram,
};
use dimprune::profile::{profile_task, select_bottom, ProfileConfig, TaskSelector};
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
        n_tasks: 4,
        n_text: 10,
        n_mc: 0,
        n_choices: 2,
        min_len: 8,
        max_len: 24,
    };
    let tasks = synth_tasks(&weights, &corpus_spec, 2)?;

    let cfg = ProfileConfig {
        n_samples: None,
        seed: 42,
        max_tokens_per_sample: 512,
    };
    let mut importances = Vec::new();
    let mut selectors: Vec<TaskSelector> = Vec::new();
    for task in &tasks {
        let importance = profile_task(&weights, &task.token_sequences(), &task.task_id, &cfg)?;
        selectors.push(select_bottom(&importance, 0.25)?);
        importances.push(importance);
    }

    let tally = tally_votes(&selectors)?;
    let histogram = vote_histogram(&selectors)?;
    println!("vote counts over {} tasks:", histogram.n_tasks);
    for (&votes, &n_dims) in histogram.buckets.iter().rev() {
        let dims: Vec<usize> = (0..tally.d).filter(|&k| tally.counts[k] == votes).collect();
        println!("  {votes} votes: {n_dims} dims {dims:?}");
    }

    let vote = merge_votes(&selectors, 0.25)?;
    let continuous = merge_continuous(&importances, 0.25)?;
    let magnitude = magnitude_dim_mask(&weights, 0.25)?;
    let random = random_mask(spec.d, 0.25, 9)?;
    println!("\nmerged masks at sparsity 0.25:");
    for mask in [&vote, &continuous, &magnitude, &random] {
        println!(
            "  {:<10} omits {:?} (tasks: {:?})",
            mask.provenance.tag(),
            mask.omit_indices,
            mask.task_ids
        );
    }

    assert_eq!(vote.omit_indices, spec.dead_dims);
    assert_eq!(continuous.omit_indices, spec.dead_dims);
    println!("\nboth task-informed merges recovered the planted dead set");
    Ok(())
}

//! Run a strategy-by-sparsity grid on one fixture and print the resulting
//! table: accuracy, perplexity, recovery, and cost per arm.
//!
//! Run with `cargo run --example sparsity_sweep`.

use dimprune::mask::MaskProvenance;
use dimprune::profile::ProfileConfig;
use dimprune::sweep::{rows_to_csv, run_sweep, SweepConfig};
use dimprune::synth::{plant_model, synth_tasks, CorpusSpec, PlantSpec};

fn main() -> dimprune::Result<()> {
    let spec = PlantSpec {
        d: 20,
        n_blocks: 2,
        n_heads: 2,
        d_ff: 28,
        vocab: 260,
        max_seq: 48,
        dead_dims: vec![2, 9, 13, 17],
        signal_dims: vec![0, 6],
        amplification: 4.0,
    };
    let weights = plant_model(&spec, 31)?;
    let corpus_spec = CorpusSpec {
        n_tasks: 3,
        n_text: 20,
        n_mc: 8,
        n_choices: 3,
        min_len: 8,
        max_len: 20,
    };
    let tasks = synth_tasks(&weights, &corpus_spec, 32)?;

    let cfg = SweepConfig {
        sparsities: vec![0.2, 0.4],
        strategies: vec![
            MaskProvenance::Vote,
            MaskProvenance::Magnitude,
            MaskProvenance::Random,
        ],
        task_counts: vec![1, 3],
        selector_sparsity: None,
        profile: ProfileConfig::default(),
        random_seeds: vec![1, 2],
        planted_dims: Some(spec.dead_dims.clone()),
        sample_counts: vec![],
    };
    let summary = run_sweep(&weights, &tasks, &cfg)?;
    println!(
        "swept {} arms (dense reference, vote over 1 and 3 tasks, magnitude, 2 random seeds, \
         at sparsities 0.2 and 0.4):\n",
        summary.rows.len()
    );
    print!("{}", rows_to_csv(&summary.rows)?);

    let recovered = summary
        .rows
        .iter()
        .filter(|r| r.strategy == "vote" && r.recovery == Some(1.0))
        .count();
    println!("\nevery vote arm found all planted dead dims: {}", recovered == 4);
    Ok(())
}

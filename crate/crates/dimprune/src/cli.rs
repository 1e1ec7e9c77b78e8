//! Command-line front end over the library pipeline.
//!
//! Every subcommand reads and writes the formats in [`crate::container`] and
//! prints a one-line JSON summary to stdout, so runs can be chained from
//! shell scripts and parsed without scraping. Failures print
//! `{"error":{"kind","message"}}` on stderr and exit nonzero.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::apply::{apply_zero_mask, assert_mask_applied, classify_sublayers, SublayerRole};
use crate::bench::run_bench;
use crate::container::{load_json, load_model, save_json, save_model, ModelMeta};
use crate::corpus::{load_corpus, save_corpus, TaskCorpus};
use crate::error::{Error, Result};
use crate::eval::{eval_mc, perplexity, EvalResult, PerplexityReport};
use crate::mask::{
    magnitude_dim_mask, merge_continuous, merge_votes, random_mask, GlobalMask,
};
use crate::model::{cost_report, CostReport, ModelConfig};
use crate::profile::{profile_task, select_bottom, ProfileConfig, TaskProfile};
use crate::prune::hard_prune;
use crate::sweep::{rows_to_csv, rows_to_jsonl, run_sweep, SweepConfig};
use crate::synth::{plant_model, synth_tasks, CorpusSpec, PlantSpec};

#[derive(Debug, Parser)]
#[command(
    name = "dimprune",
    version,
    about = "Training-free pruning of transformer residual dimensions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Prints one summary line, swallowing EPIPE so `dimprune ... | head` exits
/// quietly instead of panicking.
fn emit(value: &serde_json::Value) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{value}");
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a planted model and task corpora.
    Synth(SynthArgs),
    /// Profile one task's activations and cut its selector.
    Profile(ProfileArgs),
    /// Merge profiles (or run a baseline) into a global mask.
    Merge(MergeArgs),
    /// Bake a mask's zeros into a model.
    Apply(ApplyArgs),
    /// Physically remove masked dimensions.
    Hardprune(HardpruneArgs),
    /// Multiple-choice accuracy and perplexity.
    Eval(EvalArgs),
    /// Forward-pass timing and analytic costs.
    Bench(BenchArgs),
    /// Describe a model file: config, metadata, costs, mask roles.
    Report(ReportArgs),
    /// Run a strategy x sparsity grid from a config file.
    Sweep(SweepArgs),
}

// ── synth ───────────────────────────────────────────────────────────────────

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory for the model, task corpora, and manifest.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub d: usize,
    #[arg(long, default_value_t = 2)]
    pub n_blocks: usize,
    #[arg(long, default_value_t = 2)]
    pub n_heads: usize,
    #[arg(long, default_value_t = 32)]
    pub d_ff: usize,
    /// Must be at least 256 for the byte tokenizer.
    #[arg(long, default_value_t = 260)]
    pub vocab: usize,
    #[arg(long, default_value_t = 64)]
    pub max_seq: usize,
    /// Dimensions to silence end to end, e.g. `--dead-dims 3,7,10`.
    #[arg(long, value_delimiter = ',')]
    pub dead_dims: Vec<usize>,
    /// Dimensions to amplify.
    #[arg(long, value_delimiter = ',')]
    pub signal_dims: Vec<usize>,
    #[arg(long, default_value_t = 4.0)]
    pub amplification: f64,
    #[arg(long, default_value_t = 1)]
    pub model_seed: u64,
    #[arg(long, default_value_t = 2)]
    pub data_seed: u64,
    #[arg(long, default_value_t = 4)]
    pub n_tasks: usize,
    /// Plain-text records per task.
    #[arg(long, default_value_t = 16)]
    pub n_text: usize,
    /// Multiple-choice records per task.
    #[arg(long, default_value_t = 8)]
    pub n_mc: usize,
    #[arg(long, default_value_t = 3)]
    pub n_choices: usize,
    #[arg(long, default_value_t = 8)]
    pub min_len: usize,
    #[arg(long, default_value_t = 24)]
    pub max_len: usize,
}

/// Ground-truth record written next to a generated fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub plant: PlantSpec,
    pub corpus: CorpusSpec,
    pub model_seed: u64,
    pub data_seed: u64,
    pub model_file: String,
    pub task_files: Vec<String>,
}

fn run_synth(args: &SynthArgs) -> Result<()> {
    let plant = PlantSpec {
        d: args.d,
        n_blocks: args.n_blocks,
        n_heads: args.n_heads,
        d_ff: args.d_ff,
        vocab: args.vocab,
        max_seq: args.max_seq,
        dead_dims: args.dead_dims.clone(),
        signal_dims: args.signal_dims.clone(),
        amplification: args.amplification,
    };
    let corpus_spec = CorpusSpec {
        n_tasks: args.n_tasks,
        n_text: args.n_text,
        n_mc: args.n_mc,
        n_choices: args.n_choices,
        min_len: args.min_len,
        max_len: args.max_len,
    };
    let weights = plant_model(&plant, args.model_seed)?;
    let tasks = synth_tasks(&weights, &corpus_spec, args.data_seed)?;

    let task_dir = args.out_dir.join("tasks");
    std::fs::create_dir_all(&task_dir)?;
    save_model(&args.out_dir.join("model.bin"), &weights, &ModelMeta::plain())?;
    let mut task_files = Vec::with_capacity(tasks.len());
    for task in &tasks {
        let name = format!("{}.jsonl", task.task_id);
        save_corpus(&task_dir.join(&name), task)?;
        task_files.push(format!("tasks/{name}"));
    }
    let manifest = SynthManifest {
        plant,
        corpus: corpus_spec,
        model_seed: args.model_seed,
        data_seed: args.data_seed,
        model_file: "model.bin".into(),
        task_files,
    };
    save_json(&args.out_dir.join("plant.json"), &manifest)?;
    emit(
        &json!({
            "out_dir": args.out_dir,
            "model": "model.bin",
            "n_tasks": tasks.len(),
            "params": weights.param_count(),
        }),
    );
    Ok(())
}

// ── profile ─────────────────────────────────────────────────────────────────

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Task corpus (JSONL).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Selector sparsity: fraction of dimensions the task votes to prune.
    #[arg(long)]
    pub sparsity: f64,
    /// Samples to draw; omit to profile the whole corpus.
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long, default_value_t = 42)]
    pub profile_seed: u64,
    #[arg(long, default_value_t = 512)]
    pub max_tokens: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn run_profile(args: &ProfileArgs) -> Result<()> {
    let (weights, _) = load_model(&args.model)?;
    let corpus = load_corpus(&args.corpus)?;
    let cfg = ProfileConfig {
        n_samples: args.n_samples,
        seed: args.profile_seed,
        max_tokens_per_sample: args.max_tokens,
    };
    let importance = profile_task(&weights, &corpus.token_sequences(), &corpus.task_id, &cfg)?;
    let selector = select_bottom(&importance, args.sparsity)?;
    let profile = TaskProfile {
        importance,
        selector,
    };
    save_json(&args.out, &profile)?;
    emit(
        &json!({
            "task_id": profile.importance.task_id,
            "n_samples": profile.importance.n_samples,
            "n_tokens": profile.importance.n_tokens,
            "selector_width": profile.selector.popcount(),
            "wrote": args.out,
        }),
    );
    Ok(())
}

// ── merge ───────────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MergeStrategy {
    /// Majority vote over the profiles' selectors.
    Vote,
    /// Mean of the profiles' mean-normalized scores.
    Continuous,
    /// Weight-magnitude baseline over a model file.
    Magnitude,
    /// Seeded uniform baseline.
    Random,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[arg(long, value_enum)]
    pub strategy: MergeStrategy,
    /// Target sparsity of the merged mask.
    #[arg(long)]
    pub sparsity: f64,
    /// Profile files, for vote and continuous merging.
    #[arg(long, num_args = 1..)]
    pub profiles: Vec<PathBuf>,
    /// Model file, for the magnitude baseline.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Residual width, for the random baseline.
    #[arg(long)]
    pub d: Option<usize>,
    /// Seed for the random baseline.
    #[arg(long)]
    pub mask_seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

fn load_profiles(paths: &[PathBuf]) -> Result<Vec<TaskProfile>> {
    if paths.is_empty() {
        return Err(Error::Input(
            "this strategy needs at least one --profiles file".into(),
        ));
    }
    paths.iter().map(|p| load_json(p)).collect()
}

fn run_merge(args: &MergeArgs) -> Result<()> {
    let mask = match args.strategy {
        MergeStrategy::Vote => {
            let profiles = load_profiles(&args.profiles)?;
            let selectors: Vec<_> = profiles.into_iter().map(|p| p.selector).collect();
            merge_votes(&selectors, args.sparsity)?
        }
        MergeStrategy::Continuous => {
            let profiles = load_profiles(&args.profiles)?;
            let importances: Vec<_> = profiles.into_iter().map(|p| p.importance).collect();
            merge_continuous(&importances, args.sparsity)?
        }
        MergeStrategy::Magnitude => {
            let path = args.model.as_ref().ok_or_else(|| {
                Error::Input("the magnitude baseline needs --model".into())
            })?;
            let (weights, _) = load_model(path)?;
            magnitude_dim_mask(&weights, args.sparsity)?
        }
        MergeStrategy::Random => {
            let d = args
                .d
                .ok_or_else(|| Error::Input("the random baseline needs --d".into()))?;
            let seed = args.mask_seed.ok_or_else(|| {
                Error::Input("the random baseline needs --mask-seed".into())
            })?;
            random_mask(d, args.sparsity, seed)?
        }
    };
    save_json(&args.out, &mask)?;
    emit(
        &json!({
            "strategy": mask.provenance.tag(),
            "d": mask.d,
            "omitted": mask.omit_indices.len(),
            "wrote": args.out,
        }),
    );
    Ok(())
}

// ── apply ───────────────────────────────────────────────────────────────────

#[derive(Debug, Args)]
pub struct ApplyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Mask file from `merge`.
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn run_apply(args: &ApplyArgs) -> Result<()> {
    let (weights, meta) = load_model(&args.model)?;
    let mask: GlobalMask = load_json(&args.mask)?;
    let masked = apply_zero_mask(&weights, &mask)?;
    assert_mask_applied(&masked, &mask)?;
    let meta = ModelMeta {
        applied_mask: Some(mask.clone()),
        ..meta
    };
    save_model(&args.out, &masked, &meta)?;
    emit(
        &json!({
            "wrote": args.out,
            "d": mask.d,
            "omitted": mask.omit_indices.len(),
            "params": masked.param_count(),
        }),
    );
    Ok(())
}

// ── hardprune ───────────────────────────────────────────────────────────────

#[derive(Debug, Args)]
pub struct HardpruneArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Skip the variance correction on residual-reading weights.
    #[arg(long)]
    pub no_rescale: bool,
    /// Also write the full prune report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn run_hardprune(args: &HardpruneArgs) -> Result<()> {
    let (weights, _) = load_model(&args.model)?;
    let mask: GlobalMask = load_json(&args.mask)?;
    let (pruned, report) = hard_prune(&weights, &mask, !args.no_rescale)?;
    let meta = ModelMeta {
        format_version: crate::container::FORMAT_VERSION,
        applied_mask: None,
        prune: Some(report.stamp(&mask)),
    };
    save_model(&args.out, &pruned, &meta)?;
    if let Some(path) = &args.report {
        save_json(path, &report)?;
    }
    emit(
        &json!({
            "wrote": args.out,
            "d_original": report.d_original,
            "d_prime": report.d_prime,
            "alpha": report.alpha,
            "params_before": report.params_before,
            "params_after": report.params_after,
        }),
    );
    Ok(())
}

// ── eval ────────────────────────────────────────────────────────────────────

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Task corpora to evaluate, each with multiple-choice records.
    #[arg(long, num_args = 1..)]
    pub corpus: Vec<PathBuf>,
    /// Write the full per-item results here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Accuracy and perplexity of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEntry {
    pub eval: EvalResult,
    pub perplexity: PerplexityReport,
}

/// Everything an `eval` run measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalFileReport {
    pub entries: Vec<EvalEntry>,
}

fn run_eval(args: &EvalArgs) -> Result<()> {
    if args.corpus.is_empty() {
        return Err(Error::Input("eval needs at least one --corpus file".into()));
    }
    let (weights, _) = load_model(&args.model)?;
    let mut entries = Vec::with_capacity(args.corpus.len());
    for path in &args.corpus {
        let corpus = load_corpus(path)?;
        let eval = eval_mc(&weights, &corpus)?;
        let ppl = perplexity(&weights, &corpus.token_sequences())?;
        entries.push(EvalEntry {
            eval,
            perplexity: ppl,
        });
    }
    let summaries: Vec<_> = entries
        .iter()
        .map(|e| {
            json!({
                "task_id": e.eval.task_id,
                "n_items": e.eval.n_items,
                "accuracy": e.eval.accuracy,
                "accuracy_norm": e.eval.accuracy_norm,
                "perplexity": e.perplexity.perplexity,
            })
        })
        .collect();
    if let Some(path) = &args.out {
        save_json(path, &EvalFileReport { entries })?;
    }
    emit(&json!({ "results": summaries }));
    Ok(())
}

// ── bench ───────────────────────────────────────────────────────────────────

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Defaults to the model's max_seq.
    #[arg(long)]
    pub seq_len: Option<usize>,
    #[arg(long, default_value_t = 3)]
    pub n_warmup: usize,
    #[arg(long, default_value_t = 10)]
    pub n_iters: usize,
    #[arg(long, default_value_t = 7)]
    pub bench_seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run_bench_cmd(args: &BenchArgs) -> Result<()> {
    let (weights, _) = load_model(&args.model)?;
    let seq_len = args.seq_len.unwrap_or(weights.config.max_seq);
    let result = run_bench(&weights, seq_len, args.n_warmup, args.n_iters, args.bench_seed)?;
    if let Some(path) = &args.out {
        save_json(path, &result)?;
    }
    emit(&serde_json::to_value(&result)?);
    Ok(())
}

// ── report ──────────────────────────────────────────────────────────────────

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Sequence length for the cost figures; defaults to max_seq.
    #[arg(long)]
    pub seq_len: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Static description of a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub config: ModelConfig,
    pub meta: ModelMeta,
    pub param_count: u64,
    pub reference_seq_len: usize,
    pub cost: CostReport,
    pub sublayers: Vec<SublayerRole>,
}

fn run_report(args: &ReportArgs) -> Result<()> {
    let (weights, meta) = load_model(&args.model)?;
    let seq_len = args.seq_len.unwrap_or(weights.config.max_seq);
    let cost = cost_report(&weights.config, seq_len)?;
    let report = ModelReport {
        meta,
        param_count: weights.param_count(),
        reference_seq_len: seq_len,
        cost,
        sublayers: classify_sublayers(&weights.config),
        config: weights.config,
    };
    if let Some(path) = &args.out {
        save_json(path, &report)?;
    }
    emit(&serde_json::to_value(&report)?);
    Ok(())
}

// ── sweep ───────────────────────────────────────────────────────────────────

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep description; paths inside are relative to this file.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// On-disk sweep description: where the model and tasks live, plus the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFile {
    pub model: PathBuf,
    pub tasks: Vec<PathBuf>,
    #[serde(flatten)]
    pub grid: SweepConfig,
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn run_sweep_cmd(args: &SweepArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::io_at(&args.config, e))?;
    let file: SweepFile = serde_json::from_str(&text).map_err(|e| {
        Error::Format(format!(
            "{}: not a valid sweep config: {e}",
            args.config.display()
        ))
    })?;
    let base = args
        .config
        .parent()
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    let (weights, _) = load_model(&resolve(&base, &file.model))?;
    let tasks: Vec<TaskCorpus> = file
        .tasks
        .iter()
        .map(|p| load_corpus(&resolve(&base, p)))
        .collect::<Result<_>>()?;
    let mut grid = file.grid;
    if grid.task_counts.is_empty() {
        grid.task_counts = vec![tasks.len()];
    }
    let summary = run_sweep(&weights, &tasks, &grid)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let jsonl_path = args.out_dir.join("rows.jsonl");
    let csv_path = args.out_dir.join("rows.csv");
    std::fs::write(&jsonl_path, rows_to_jsonl(&summary.rows)?)?;
    std::fs::write(&csv_path, rows_to_csv(&summary.rows)?)?;
    emit(
        &json!({
            "rows": summary.rows.len(),
            "wrote": [jsonl_path, csv_path],
        }),
    );
    Ok(())
}

// ── dispatch ────────────────────────────────────────────────────────────────

/// Runs one parsed command to completion.
pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(args) => run_synth(args),
        Command::Profile(args) => run_profile(args),
        Command::Merge(args) => run_merge(args),
        Command::Apply(args) => run_apply(args),
        Command::Hardprune(args) => run_hardprune(args),
        Command::Eval(args) => run_eval(args),
        Command::Bench(args) => run_bench_cmd(args),
        Command::Report(args) => run_report(args),
        Command::Sweep(args) => run_sweep_cmd(args),
    }
}

//! Training-free structured pruning of transformer residual dimensions.
//!
//! The crate implements a complete desk-scale pipeline around one idea: some
//! coordinates of a transformer's residual stream barely carry activation
//! mass for the tasks you care about, and they can be identified and removed
//! without any retraining. The pieces, in pipeline order:
//!
//! - [`model`]: a miniature pre-norm decoder-only transformer in `f64`, with
//!   seeded construction, activation capture, and analytic cost accounting.
//! - [`profile`]: per-task importance scores from mean absolute MLP output
//!   activations, and bottom-scoring dimension selectors.
//! - [`mask`]: cross-task merging of selectors into one global mask by
//!   majority vote (plus continuous, magnitude, and random baselines).
//! - [`apply`]: uniform zero-masking of every sublayer touching the chosen
//!   dimensions, keeping shapes intact.
//! - [`prune`]: hard compaction of the masked dimensions with a
//!   variance-correcting rescale, preserving logits exactly when the norm
//!   epsilon is zero.
//! - [`eval`], [`bench`], [`sweep`]: a multiple-choice and perplexity
//!   harness, latency and cost measurement, and grid orchestration.
//! - [`container`], [`corpus`], [`tokenizer`], [`synth`]: the on-disk model
//!   format, JSONL corpora, the byte-level tokenizer, and synthetic fixtures
//!   with planted dead dimensions.
//!
//! Every step is deterministic under fixed seeds, and every on-disk artifact
//! round-trips losslessly. The `examples/` directory walks through each
//! capability end to end; the `dimprune` binary exposes the same pipeline as
//! subcommands.

pub mod apply;
pub mod bench;
pub mod container;
pub mod cli;
pub mod corpus;
pub mod eval;
pub mod error;
pub mod mask;
pub mod model;
pub mod profile;
pub mod prune;
pub mod sweep;
pub mod synth;
pub mod tensor;
pub mod tokenizer;

pub use error::{Error, Result};

//! Contextual paraphrase generation for customer-support agent responses.
//!
//! The crate is organised around the stages of the pipeline:
//!
//! - [`corpus`]: transcript ingestion, context-window sample construction, splits.
//! - [`controlwords`]: POS-based control-word extraction, subsampling, corruption.
//! - [`generator`]: tokenizer, prompt layout, the tiny transformer backend, SFT, decoding.
//! - [`entailment`]: bi-encoder trained with in-batch negatives, NUC evaluation.
//! - [`fluency`]: acceptability classifier and MCC.
//! - [`metrics`]: BLEU / inverse BLEU, greedy-matching semantic similarity, composite score.
//! - [`rl`]: KL-penalized reward, rollouts, PPO.
//! - [`evalharness`]: baseline grid, report aggregation, significance tests, human labels.
//! - [`cli`]: the `ctxpara` command line front end.

pub mod cli;
pub mod config;
pub mod controlwords;
pub mod corpus;
pub mod entailment;
mod error;
pub mod evalharness;
pub mod fluency;
pub mod generator;
pub mod io;
pub mod manifest;
pub mod metrics;
pub mod rl;
pub mod seed;
pub mod text;

pub use error::{Error, Result};

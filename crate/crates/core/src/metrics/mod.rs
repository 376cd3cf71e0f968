//! Sub-metrics and the composite evaluator.

pub mod bleu;
pub mod composite;
pub mod semantic;

pub use bleu::{bleu, inverse_bleu, BleuConfig, Smoothing};
pub use composite::{composite_mean, CompositeEvaluator, Evaluator, ScoreBreakdown};
pub use semantic::{cosine, greedy_match, semantic_similarity, HashTokenEmbedder, TableTokenEmbedder, TokenEmbedder};

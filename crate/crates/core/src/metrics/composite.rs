//! The composite evaluator: equal-weight mean of semantic similarity,
//! entailment, expression diversity and fluency.

use serde::{Deserialize, Serialize};

use super::bleu::{inverse_bleu, BleuConfig};
use super::semantic::{semantic_similarity, TokenEmbedder};
use crate::entailment::PairScorer;
use crate::fluency::FluencyScorer;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub sample_id: String,
    pub semantic_similarity: f64,
    pub textual_entailment: f64,
    pub expression_diversity: f64,
    pub fluency: f64,
    pub composite: f64,
    /// Set when the generation was empty and every component was scored 0.
    #[serde(default)]
    pub degenerate: bool,
}

/// Arithmetic mean of the four components.
pub fn composite_mean(semantic: f64, entailment: f64, diversity: f64, fluency: f64) -> f64 {
    (semantic + entailment + diversity + fluency) / 4.0
}

impl ScoreBreakdown {
    pub fn new(sample_id: impl Into<String>, semantic: f64, entailment: f64, diversity: f64, fluency: f64) -> Self {
        ScoreBreakdown {
            sample_id: sample_id.into(),
            semantic_similarity: semantic,
            textual_entailment: entailment,
            expression_diversity: diversity,
            fluency,
            composite: composite_mean(semantic, entailment, diversity, fluency),
            degenerate: false,
        }
    }

    pub fn degenerate(sample_id: impl Into<String>) -> Self {
        ScoreBreakdown {
            degenerate: true,
            ..ScoreBreakdown::new(sample_id, 0.0, 0.0, 0.0, 0.0)
        }
    }

    pub fn components(&self) -> [f64; 4] {
        [
            self.semantic_similarity,
            self.textual_entailment,
            self.expression_diversity,
            self.fluency,
        ]
    }
}

/// Scores a generation against its context and the actual response.
pub trait Evaluator: Send + Sync {
    fn evaluate(&self, sample_id: &str, context: &str, actual: &str, generated: &str) -> Result<ScoreBreakdown>;
}

pub struct CompositeEvaluator<'a> {
    pub embedder: &'a dyn TokenEmbedder,
    pub entailment: &'a dyn PairScorer,
    pub fluency: &'a dyn FluencyScorer,
    pub bleu: BleuConfig,
}

fn component<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::in_component(name, e))
}

impl Evaluator for CompositeEvaluator<'_> {
    /// An empty generation receives an all-zero breakdown flagged as degenerate.
    fn evaluate(&self, sample_id: &str, context: &str, actual: &str, generated: &str) -> Result<ScoreBreakdown> {
        if crate::text::simple_tokens(generated).is_empty() {
            return Ok(ScoreBreakdown::degenerate(sample_id));
        }
        let sem = component("semantic_similarity", semantic_similarity(self.embedder, generated, actual))?;
        let ent = component("textual_entailment", self.entailment.score_pair(context, generated))?;
        let div = component("expression_diversity", inverse_bleu(generated, actual, &self.bleu))?;
        let flu = component("fluency", self.fluency.fluency(generated))?;
        Ok(ScoreBreakdown::new(sample_id, sem, ent, div, flu))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composite_of_zeros() {
        assert_eq!(ScoreBreakdown::new("x", 0.0, 0.0, 0.0, 0.0).composite, 0.0);
    }

    #[test]
    fn first_and_last_rows_of_published_table() {
        assert!((composite_mean(0.268, 0.559, 0.954, 0.859) - 0.660).abs() <= 0.0005);
        assert!((composite_mean(0.671, 0.726, 0.742, 0.873) - 0.753).abs() <= 0.0005);
    }
}

//! Sentence-level BLEU and its complement, inverse BLEU.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::text::simple_tokens;
use crate::{Error, Result};

pub const TOKENIZATION_ID: &str = "lower-punct-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    None,
    /// Zero match counts are replaced by `epsilon`.
    Epsilon,
    /// Orders above one get +1 on both matches and totals.
    AddOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BleuConfig {
    pub max_ngram_order: usize,
    pub smoothing: Smoothing,
    pub epsilon: f64,
    pub case_fold: bool,
    pub tokenization: String,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig {
            max_ngram_order: 4,
            smoothing: Smoothing::Epsilon,
            epsilon: 1e-9,
            case_fold: true,
            tokenization: TOKENIZATION_ID.to_string(),
        }
    }
}

impl BleuConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_ngram_order == 0 {
            return Err(Error::invalid("max_ngram_order must be at least 1"));
        }
        if self.tokenization != TOKENIZATION_ID {
            return Err(Error::invalid(format!("unknown tokenization {:?}", self.tokenization)));
        }
        Ok(())
    }

    pub fn tokenize(&self, text: &str) -> Vec<String> {
        if self.case_fold {
            simple_tokens(text)
        } else {
            crate::text::split_pieces(text)
                .into_iter()
                .filter(|p| p.kind != crate::text::PieceKind::Newline)
                .map(|p| p.text(text).to_string())
                .collect()
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for g in tokens.windows(n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

/// Clipped matches and candidate n-gram total for one order.
pub fn modified_precision_counts(candidate: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let refc = ngram_counts(reference, n);
    let matches = cand
        .iter()
        .map(|(g, &c)| c.min(refc.get(g).copied().unwrap_or(0)))
        .sum();
    (matches, candidate.len().saturating_sub(n - 1))
}

/// Sentence BLEU on pre-tokenized input. Orders for which the candidate has
/// no n-grams at all are left out of the geometric mean.
pub fn bleu_tokens(candidate: &[String], reference: &[String], cfg: &BleuConfig) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    let mut orders = 0;
    for n in 1..=cfg.max_ngram_order {
        let (m, total) = modified_precision_counts(candidate, reference, n);
        if total == 0 {
            continue;
        }
        let (m, total) = match cfg.smoothing {
            Smoothing::None => (m as f64, total as f64),
            Smoothing::Epsilon if m == 0 => (cfg.epsilon, total as f64),
            Smoothing::Epsilon => (m as f64, total as f64),
            Smoothing::AddOne if n > 1 => (m as f64 + 1.0, total as f64 + 1.0),
            Smoothing::AddOne => (m as f64, total as f64),
        };
        if m == 0.0 {
            return 0.0;
        }
        log_sum += (m / total).ln();
        orders += 1;
    }
    let c = candidate.len() as f64;
    let r = reference.len() as f64;
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    (bp * (log_sum / orders as f64).exp()).clamp(0.0, 1.0)
}

/// Sentence BLEU of `candidate` against a single `reference`.
pub fn bleu(candidate: &str, reference: &str, cfg: &BleuConfig) -> Result<f64> {
    cfg.validate()?;
    let reference = cfg.tokenize(reference);
    if reference.is_empty() {
        return Err(Error::invalid("BLEU reference is empty"));
    }
    Ok(bleu_tokens(&cfg.tokenize(candidate), &reference, cfg))
}

/// `1 − BLEU(generated, actual)`: expression diversity.
pub fn inverse_bleu(generated: &str, actual: &str, cfg: &BleuConfig) -> Result<f64> {
    Ok(1.0 - bleu(generated, actual, cfg)?)
}

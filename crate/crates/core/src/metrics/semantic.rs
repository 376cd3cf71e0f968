//! Greedy token-matching similarity over token embeddings.

use std::collections::HashMap;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::seed::{fnv1a, rng_from_seed};
use crate::text::simple_tokens;
use crate::{Error, Result};

/// Maps a text to one embedding vector per token.
pub trait TokenEmbedder: Send + Sync {
    fn id(&self) -> String;
    fn embed_tokens(&self, text: &str) -> Result<Vec<Vec<f64>>>;
}

/// Deterministic pseudo-random vectors per lowercased token. With
/// `context_mix > 0` each vector is blended with the mean of its neighbours,
/// which makes the embedding of a token depend on its surroundings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HashTokenEmbedder {
    pub dim: usize,
    pub seed: u64,
    pub context_mix: f64,
}

impl Default for HashTokenEmbedder {
    fn default() -> Self {
        HashTokenEmbedder {
            dim: 64,
            seed: 0,
            context_mix: 0.25,
        }
    }
}

impl HashTokenEmbedder {
    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut rng = rng_from_seed(fnv1a(token.as_bytes()) ^ self.seed);
        (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect()
    }
}

impl TokenEmbedder for HashTokenEmbedder {
    fn id(&self) -> String {
        format!("hash-{}d-seed{}-mix{}", self.dim, self.seed, self.context_mix)
    }

    fn embed_tokens(&self, text: &str) -> Result<Vec<Vec<f64>>> {
        let base: Vec<Vec<f64>> = simple_tokens(text).iter().map(|t| self.token_vector(t)).collect();
        if self.context_mix == 0.0 {
            return Ok(base);
        }
        Ok((0..base.len())
            .map(|i| {
                let neigh: Vec<&Vec<f64>> = [i.checked_sub(1), Some(i + 1)]
                    .into_iter()
                    .flatten()
                    .filter_map(|j| base.get(j))
                    .collect();
                (0..self.dim)
                    .map(|d| {
                        let m = if neigh.is_empty() {
                            0.0
                        } else {
                            neigh.iter().map(|v| v[d]).sum::<f64>() / neigh.len() as f64
                        };
                        base[i][d] + self.context_mix * m
                    })
                    .collect()
            })
            .collect())
    }
}

/// Fixed vectors per token; unknown tokens are an error.
#[derive(Debug, Clone, Default)]
pub struct TableTokenEmbedder {
    pub table: HashMap<String, Vec<f64>>,
}

impl TokenEmbedder for TableTokenEmbedder {
    fn id(&self) -> String {
        "table".into()
    }

    fn embed_tokens(&self, text: &str) -> Result<Vec<Vec<f64>>> {
        simple_tokens(text)
            .iter()
            .map(|t| {
                self.table
                    .get(t)
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("token {t:?} not in embedding table")))
            })
            .collect()
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedyMatch {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision: mean over candidate tokens of the best cosine to any reference
/// token. Recall: the same with roles swapped. F1 is unclamped here.
pub fn greedy_match(candidate: &[Vec<f64>], reference: &[Vec<f64>]) -> GreedyMatch {
    let sims: Vec<Vec<f64>> = candidate
        .iter()
        .map(|c| reference.iter().map(|r| cosine(c, r)).collect())
        .collect();
    let precision = sims
        .iter()
        .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / candidate.len() as f64;
    let recall = (0..reference.len())
        .map(|j| sims.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / reference.len() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    GreedyMatch { precision, recall, f1 }
}

/// Greedy-matching F1 between generated and actual text, clamped to [0, 1].
pub fn semantic_similarity(embedder: &dyn TokenEmbedder, generated: &str, actual: &str) -> Result<f64> {
    let g = embedder.embed_tokens(generated)?;
    let a = embedder.embed_tokens(actual)?;
    if g.is_empty() || a.is_empty() {
        return Err(Error::invalid("semantic similarity needs two non-empty texts"));
    }
    Ok(greedy_match(&g, &a).f1.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(entries: &[(&str, Vec<f64>)]) -> TableTokenEmbedder {
        TableTokenEmbedder {
            table: entries.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        }
    }

    #[test]
    fn self_match_is_one() {
        let e = HashTokenEmbedder::default();
        let s = semantic_similarity(&e, "your refund is on its way", "your refund is on its way").unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_disjoint_is_zero() {
        let e = table(&[("a", vec![1.0, 0.0, 0.0]), ("b", vec![0.0, 1.0, 0.0]), ("c", vec![0.0, 0.0, -1.0])]);
        assert_eq!(semantic_similarity(&e, "a b", "c").unwrap(), 0.0);
    }

    #[test]
    fn two_token_closed_form() {
        let s = 0.5f64.sqrt();
        let e = table(&[("x", vec![1.0, 0.0]), ("y", vec![s, s]), ("z", vec![0.0, 1.0])]);
        // precision over {x, y} against {z}: (0 + s) / 2; recall: max(0, s) = s
        let p = s / 2.0;
        let f = 2.0 * p * s / (p + s);
        assert!((semantic_similarity(&e, "x y", "z").unwrap() - f).abs() < 1e-12);
    }

    #[test]
    fn empty_text_is_error() {
        assert!(semantic_similarity(&HashTokenEmbedder::default(), "", "hi").is_err());
    }

    #[test]
    fn symmetric_without_context() {
        let e = HashTokenEmbedder {
            context_mix: 0.0,
            ..HashTokenEmbedder::default()
        };
        let a = semantic_similarity(&e, "we will refund you", "your refund is ready").unwrap();
        let b = semantic_similarity(&e, "your refund is ready", "we will refund you").unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}

//! Bi-encoder trained on positive (context, response) pairs with a
//! multiple-negatives ranking loss, the entailment score derived from it, and
//! next-utterance-classification evaluation.
//!
//! The encoder is a trainable table of hashed uni/bigram bucket embeddings,
//! pooled per text. Gradients are written out by hand.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::EntailmentPair;
use crate::seed::{fnv1a, rng_for, rng_from_seed};
use crate::text::simple_tokens;
use crate::{Error, Result};

pub const NUC_DISTRACTORS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    Mean,
    FirstToken,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub embed_dim: usize,
    pub n_buckets: usize,
    pub pooling: Pooling,
    pub bigrams: bool,
    pub init_seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            embed_dim: 32,
            n_buckets: 2048,
            pooling: Pooling::Mean,
            bigrams: true,
            init_seed: 0,
        }
    }
}

/// Scores how well a response follows a context, in [0, 1].
pub trait PairScorer: Send + Sync {
    fn score_pair(&self, context: &str, response: &str) -> Result<f64>;
}

/// Bucket ids for a text: one per lowercased token, then one per adjacent
/// token pair when bigrams are enabled.
pub fn hash_features(text: &str, n_buckets: usize, bigrams: bool) -> Vec<usize> {
    let toks = simple_tokens(text);
    let mut out: Vec<usize> = toks
        .iter()
        .map(|t| (fnv1a(format!("u:{t}").as_bytes()) % n_buckets as u64) as usize)
        .collect();
    if bigrams {
        out.extend(
            toks.windows(2)
                .map(|w| (fnv1a(format!("b:{} {}", w[0], w[1]).as_bytes()) % n_buckets as u64) as usize),
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashEncoder {
    pub config: EncoderConfig,
    /// Row-major `[n_buckets, embed_dim]`.
    table: Vec<f64>,
}

impl HashEncoder {
    pub fn new(config: EncoderConfig) -> Result<Self> {
        if config.embed_dim == 0 || config.n_buckets == 0 {
            return Err(Error::invalid("embed_dim and n_buckets must be positive"));
        }
        let mut rng = rng_from_seed(config.init_seed);
        let dist = Normal::new(0.0, 1.0 / (config.embed_dim as f64).sqrt()).expect("valid std");
        let table = (0..config.n_buckets * config.embed_dim).map(|_| dist.sample(&mut rng)).collect();
        Ok(HashEncoder { config, table })
    }

    pub fn embed_dim(&self) -> usize {
        self.config.embed_dim
    }

    pub fn parameters(&self) -> &[f64] {
        &self.table
    }

    fn row(&self, b: usize) -> &[f64] {
        let d = self.config.embed_dim;
        &self.table[b * d..(b + 1) * d]
    }

    /// Buckets that contribute to the pooled vector, each with its weight.
    fn pooled_features(&self, text: &str) -> Result<Vec<(usize, f64)>> {
        let feats = hash_features(text, self.config.n_buckets, self.config.bigrams);
        if feats.is_empty() {
            return Err(Error::invalid("cannot embed empty text"));
        }
        Ok(match self.config.pooling {
            Pooling::FirstToken => vec![(feats[0], 1.0)],
            Pooling::Mean => {
                let w = 1.0 / feats.len() as f64;
                feats.into_iter().map(|b| (b, w)).collect()
            }
        })
    }

    /// Unnormalized pooled embedding.
    pub fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.config.embed_dim];
        for (b, w) in self.pooled_features(text)? {
            for (x, y) in v.iter_mut().zip(self.row(b)) {
                *x += w * y;
            }
        }
        Ok(v)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        crate::io::write_json(&dir.join("encoder.json"), self)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let enc: HashEncoder = crate::io::read_json(&dir.join("encoder.json")).map_err(|e| Error::Checkpoint {
            path: dir.to_path_buf(),
            message: e.to_string(),
        })?;
        if enc.table.len() != enc.config.n_buckets * enc.config.embed_dim {
            return Err(Error::Checkpoint {
                path: dir.to_path_buf(),
                message: "embedding table size does not match its config".into(),
            });
        }
        Ok(enc)
    }
}

impl PairScorer for HashEncoder {
    fn score_pair(&self, context: &str, response: &str) -> Result<f64> {
        entailment_score(self, context, response)
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    crate::metrics::cosine(a, b)
}

/// `(1 + cos) / 2` between the two embeddings.
pub fn entailment_score(encoder: &HashEncoder, context: &str, response: &str) -> Result<f64> {
    let c = encoder.embed(context)?;
    let r = encoder.embed(response)?;
    Ok(((1.0 + cosine(&c, &r)) / 2.0).clamp(0.0, 1.0))
}

fn normalized(v: &[f64]) -> (Vec<f64>, f64) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 {
        (vec![0.0; v.len()], 0.0)
    } else {
        (v.iter().map(|x| x / n).collect(), n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnrOutput {
    pub loss: f64,
    /// dL/d context embedding, one row per batch item.
    pub grad_context: Vec<Vec<f64>>,
    pub grad_response: Vec<Vec<f64>>,
}

/// `(1/B) Σ_i −log softmax_j(scale · cos(c_i, r_j))[i]` and its gradient with
/// respect to the unnormalized embeddings.
pub fn mnr_loss_and_grad(context: &[Vec<f64>], response: &[Vec<f64>], scale: f64) -> Result<MnrOutput> {
    let b = context.len();
    if b < 2 {
        return Err(Error::invalid("ranking loss needs at least two pairs for in-batch negatives"));
    }
    if response.len() != b {
        return Err(Error::invalid("context and response batches differ in size"));
    }
    if scale <= 0.0 {
        return Err(Error::invalid("scale must be positive"));
    }
    let cn: Vec<(Vec<f64>, f64)> = context.iter().map(|v| normalized(v)).collect();
    let rn: Vec<(Vec<f64>, f64)> = response.iter().map(|v| normalized(v)).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut loss = 0.0;
    let mut g = vec![vec![0.0; b]; b];
    for i in 0..b {
        let s: Vec<f64> = (0..b).map(|j| scale * dot(&cn[i].0, &rn[j].0)).collect();
        let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = s.iter().map(|x| (x - m).exp()).sum();
        loss += m + z.ln() - s[i];
        for j in 0..b {
            let p = (s[j] - m).exp() / z;
            g[i][j] = (p - if i == j { 1.0 } else { 0.0 }) / b as f64;
        }
    }
    loss /= b as f64;
    let dim = context[0].len();
    let back = |unit: &[f64], norm: f64, gu: Vec<f64>| -> Vec<f64> {
        if norm == 0.0 {
            return vec![0.0; dim];
        }
        let proj = dot(unit, &gu);
        gu.iter().zip(unit).map(|(g, u)| (g - u * proj) / norm).collect()
    };
    let grad_context = (0..b)
        .map(|i| {
            let mut gu = vec![0.0; dim];
            for j in 0..b {
                for (x, r) in gu.iter_mut().zip(&rn[j].0) {
                    *x += scale * g[i][j] * r;
                }
            }
            back(&cn[i].0, cn[i].1, gu)
        })
        .collect();
    let grad_response = (0..b)
        .map(|j| {
            let mut gu = vec![0.0; dim];
            for i in 0..b {
                for (x, c) in gu.iter_mut().zip(&cn[i].0) {
                    *x += scale * g[i][j] * c;
                }
            }
            back(&rn[j].0, rn[j].1, gu)
        })
        .collect();
    Ok(MnrOutput {
        loss,
        grad_context,
        grad_response,
    })
}

pub fn mnr_loss(context: &[Vec<f64>], response: &[Vec<f64>], scale: f64) -> Result<f64> {
    Ok(mnr_loss_and_grad(context, response, scale)?.loss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntailmentTrainConfig {
    pub encoder: EncoderConfig,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub scale: f64,
    pub seed: u64,
}

impl Default for EntailmentTrainConfig {
    fn default() -> Self {
        EntailmentTrainConfig {
            encoder: EncoderConfig::default(),
            steps: 300,
            batch_size: 16,
            learning_rate: 0.01,
            scale: 20.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailmentTrainReport {
    pub losses: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for k in 0..params.len() {
            self.m[k] = Self::B1 * self.m[k] + (1.0 - Self::B1) * grad[k];
            self.v[k] = Self::B2 * self.v[k] + (1.0 - Self::B2) * grad[k] * grad[k];
            params[k] -= self.lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Trains a fresh encoder on shuffled batches of positive pairs.
pub fn train_entailment(
    pairs: &[EntailmentPair],
    cfg: &EntailmentTrainConfig,
) -> Result<(HashEncoder, EntailmentTrainReport)> {
    let mut enc = HashEncoder::new(cfg.encoder.clone())?;
    if cfg.batch_size < 2 {
        return Err(Error::invalid("batch_size must be at least 2"));
    }
    if cfg.steps > 0 && pairs.len() < 2 * cfg.batch_size {
        return Err(Error::invalid(format!(
            "{} pairs is fewer than two batches of {}",
            pairs.len(),
            cfg.batch_size
        )));
    }
    let mut adam = Adam::new(enc.table.len(), cfg.learning_rate);
    let mut losses = Vec::with_capacity(cfg.steps);
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut epoch = 0usize;
    let d = enc.config.embed_dim;
    for step in 1..=cfg.steps {
        if cursor + cfg.batch_size > order.len() {
            order = (0..pairs.len()).collect();
            order.shuffle(&mut rng_for(cfg.seed, &format!("mnr-order:{epoch}")));
            cursor = 0;
            epoch += 1;
        }
        let batch: Vec<&EntailmentPair> = order[cursor..cursor + cfg.batch_size].iter().map(|&i| &pairs[i]).collect();
        cursor += cfg.batch_size;
        let feats_c: Vec<Vec<(usize, f64)>> = batch
            .iter()
            .map(|p| enc.pooled_features(&p.context_text))
            .collect::<Result<_>>()?;
        let feats_r: Vec<Vec<(usize, f64)>> = batch
            .iter()
            .map(|p| enc.pooled_features(&p.response_text))
            .collect::<Result<_>>()?;
        let pool = |feats: &[(usize, f64)]| {
            let mut v = vec![0.0; d];
            for &(b, w) in feats {
                for (x, y) in v.iter_mut().zip(enc.row(b)) {
                    *x += w * y;
                }
            }
            v
        };
        let ce: Vec<Vec<f64>> = feats_c.iter().map(|f| pool(f)).collect();
        let re: Vec<Vec<f64>> = feats_r.iter().map(|f| pool(f)).collect();
        let out = mnr_loss_and_grad(&ce, &re, cfg.scale)?;
        if !out.loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                step,
                batch: step - 1,
                detail: format!("ranking loss {} in epoch {}", out.loss, epoch - 1),
            });
        }
        let mut grad = vec![0.0; enc.table.len()];
        for (feats, g) in feats_c.iter().zip(&out.grad_context).chain(feats_r.iter().zip(&out.grad_response)) {
            for &(b, w) in feats {
                for (k, gk) in g.iter().enumerate() {
                    grad[b * d + k] += w * gk;
                }
            }
        }
        adam.step(&mut enc.table, &grad);
        losses.push(out.loss);
    }
    if let Some(l) = losses.last() {
        log::info!("entailment training finished: final loss {l:.4}");
    }
    Ok((enc, EntailmentTrainReport { losses }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NucEvalCase {
    pub context: String,
    pub response: String,
    pub distractors: Vec<String>,
}

impl NucEvalCase {
    pub fn validate(&self) -> Result<()> {
        if self.distractors.len() != NUC_DISTRACTORS {
            return Err(Error::invalid(format!(
                "expected {NUC_DISTRACTORS} distractors, got {}",
                self.distractors.len()
            )));
        }
        if self.distractors.contains(&self.response) {
            return Err(Error::invalid("true response appears among the distractors"));
        }
        Ok(())
    }

    /// Distractors first, true response last, so ties never favour the truth.
    pub fn candidates(&self) -> Vec<&str> {
        self.distractors
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(self.response.as_str()))
            .collect()
    }
}

/// One case per pair; distractors drawn uniformly from the other distinct
/// response strings of the same split.
pub fn build_nuc_cases(pairs: &[EntailmentPair], seed: u64) -> Result<Vec<NucEvalCase>> {
    let pool: Vec<&str> = pairs
        .iter()
        .map(|p| p.response_text.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if pool.len() <= NUC_DISTRACTORS {
        return Err(Error::invalid(format!(
            "need more than {NUC_DISTRACTORS} distinct responses to build distractors, found {}",
            pool.len()
        )));
    }
    pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let others: Vec<&str> = pool.iter().copied().filter(|r| *r != p.response_text).collect();
            let mut rng = rng_for(seed, &format!("nuc:{i}"));
            let distractors = others
                .choose_multiple(&mut rng, NUC_DISTRACTORS)
                .map(|s| s.to_string())
                .collect();
            Ok(NucEvalCase {
                context: p.context_text.clone(),
                response: p.response_text.clone(),
                distractors,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NucMetrics {
    pub r_at_1: f64,
    pub r_at_2: f64,
    pub mrr: f64,
    pub cases: usize,
}

/// 1-based rank of the true response; candidates with equal scores keep list order.
pub fn true_rank(scorer: &dyn PairScorer, case: &NucEvalCase) -> Result<usize> {
    case.validate()?;
    let cands = case.candidates();
    let scores: Vec<f64> = cands
        .iter()
        .map(|c| scorer.score_pair(&case.context, c))
        .collect::<Result<_>>()?;
    let mut idx: Vec<usize> = (0..cands.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let truth = cands.len() - 1;
    Ok(idx.iter().position(|&i| i == truth).expect("truth is a candidate") + 1)
}

pub fn evaluate_nuc(scorer: &dyn PairScorer, cases: &[NucEvalCase]) -> Result<NucMetrics> {
    if cases.is_empty() {
        return Err(Error::invalid("no NUC cases"));
    }
    let ranks: Vec<usize> = cases.iter().map(|c| true_rank(scorer, c)).collect::<Result<_>>()?;
    let n = ranks.len() as f64;
    Ok(NucMetrics {
        r_at_1: ranks.iter().filter(|&&r| r == 1).count() as f64 / n,
        r_at_2: ranks.iter().filter(|&&r| r <= 2).count() as f64 / n,
        mrr: ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n,
        cases: ranks.len(),
    })
}

/// In-batch retrieval accuracy: how often each context's own response wins
/// among all responses of the set.
pub fn retrieval_accuracy(scorer: &dyn PairScorer, pairs: &[EntailmentPair]) -> Result<f64> {
    let mut hits = 0;
    for p in pairs {
        let own = scorer.score_pair(&p.context_text, &p.response_text)?;
        let mut best = true;
        let mut seen = HashSet::new();
        for q in pairs {
            if q.response_text != p.response_text && seen.insert(&q.response_text) {
                if scorer.score_pair(&p.context_text, &q.response_text)? >= own {
                    best = false;
                    break;
                }
            }
        }
        hits += best as usize;
    }
    Ok(hits as f64 / pairs.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_similarity_gives_ln_b() {
        for b in [2usize, 4, 8] {
            let v = vec![vec![0.3, -1.2, 0.5]; b];
            assert!((mnr_loss(&v, &v, 20.0).unwrap() - (b as f64).ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn orthogonal_pair_closed_form() {
        let e = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let want = -(1f64.exp() / (1f64.exp() + 1.0)).ln();
        assert!((mnr_loss(&e, &e, 1.0).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn batch_of_one_is_error() {
        assert!(mnr_loss(&[vec![1.0]], &[vec![1.0]], 1.0).is_err());
    }

    #[test]
    fn entailment_score_bounds() {
        let enc = HashEncoder::new(EncoderConfig::default()).unwrap();
        let s = entailment_score(&enc, "where is my food", "where is my food").unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(entailment_score(&enc, "", "x").is_err());
    }

    #[test]
    fn embedding_matches_feature_recomputation() {
        let cfg = EncoderConfig {
            n_buckets: 64,
            embed_dim: 4,
            ..EncoderConfig::default()
        };
        let enc = HashEncoder::new(cfg).unwrap();
        let text = "Order arrived late";
        let toks = ["order", "arrived", "late"];
        let mut buckets: Vec<u64> = toks.iter().map(|t| fnv1a(format!("u:{t}").as_bytes()) % 64).collect();
        buckets.push(fnv1a(b"b:order arrived") % 64);
        buckets.push(fnv1a(b"b:arrived late") % 64);
        let mut want = vec![0.0; 4];
        for b in &buckets {
            for k in 0..4 {
                want[k] += enc.parameters()[*b as usize * 4 + k] / 5.0;
            }
        }
        let got = enc.embed(text).unwrap();
        for k in 0..4 {
            assert!((got[k] - want[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_steps_keeps_initialization() {
        let cfg = EntailmentTrainConfig {
            steps: 0,
            ..EntailmentTrainConfig::default()
        };
        let (enc, _) = train_entailment(&[], &cfg).unwrap();
        assert_eq!(enc, HashEncoder::new(cfg.encoder).unwrap());
    }

    #[test]
    fn ranks_break_ties_against_truth() {
        struct Constant;
        impl PairScorer for Constant {
            fn score_pair(&self, _: &str, _: &str) -> Result<f64> {
                Ok(0.5)
            }
        }
        let case = NucEvalCase {
            context: "c".into(),
            response: "t".into(),
            distractors: (0..9).map(|i| format!("d{i}")).collect(),
        };
        assert_eq!(true_rank(&Constant, &case).unwrap(), 10);
    }
}

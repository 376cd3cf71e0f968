use rand::Rng;
use serde::{Deserialize, Serialize};

use super::prompt::PromptEncoding;
use super::tokenizer::{CTX_CTRL_ID, CW_ID, EOS_ID, PAD_ID, RESP_ID};
use super::LanguageModel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeStrategy {
    Greedy,
    TopP,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub strategy: DecodeStrategy,
    pub temperature: f64,
    pub top_p: f64,
    pub max_new_tokens: usize,
    /// End-of-text is suppressed until this many tokens have been produced.
    pub min_new_tokens: usize,
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            strategy: DecodeStrategy::TopP,
            temperature: 1.0,
            top_p: 0.9,
            max_new_tokens: 32,
            min_new_tokens: 1,
            seed: 0,
        }
    }
}

impl DecodeConfig {
    pub fn greedy(max_new_tokens: usize) -> Self {
        DecodeConfig {
            strategy: DecodeStrategy::Greedy,
            max_new_tokens,
            ..DecodeConfig::default()
        }
    }

    /// Parses comma-separated overrides such as `top_p=0.9,temperature=0.7`
    /// or `greedy,max_new_tokens=20`.
    pub fn parse_overrides(mut self, spec: &str) -> Result<Self> {
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').unwrap_or((part, ""));
            let bad = || Error::invalid(format!("bad decode option {part:?}"));
            match key {
                "greedy" => self.strategy = DecodeStrategy::Greedy,
                "top_p" => {
                    self.strategy = DecodeStrategy::TopP;
                    self.top_p = value.parse().map_err(|_| bad())?;
                }
                "temperature" => self.temperature = value.parse().map_err(|_| bad())?,
                "max_new_tokens" => self.max_new_tokens = value.parse().map_err(|_| bad())?,
                "min_new_tokens" => self.min_new_tokens = value.parse().map_err(|_| bad())?,
                _ => return Err(bad()),
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_new_tokens == 0 {
            return Err(Error::invalid("max_new_tokens must be at least 1"));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::invalid(format!("top_p {} outside (0, 1]", self.top_p)));
        }
        if self.temperature <= 0.0 || !self.temperature.is_finite() {
            return Err(Error::invalid(format!("temperature {} must be positive", self.temperature)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub text: String,
    /// Generated ids, including the end-of-text token when one was produced.
    pub token_ids: Vec<u32>,
    /// log P(token) under the unmodified model distribution, one per generated id.
    pub per_token_logprobs: Vec<f64>,
    pub decode_config: DecodeConfig,
    /// True when no visible text was produced.
    pub empty: bool,
}

/// One line of a generation JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub sample_id: String,
    pub generated: String,
    pub logprob: f64,
    pub decode_config: DecodeConfig,
}

impl GenerationRecord {
    pub fn new(sample_id: &str, g: &GenerationResult) -> Self {
        GenerationRecord {
            sample_id: sample_id.to_string(),
            generated: g.text.clone(),
            logprob: g.logprob(),
            decode_config: g.decode_config.clone(),
        }
    }
}

impl GenerationResult {
    pub fn logprob(&self) -> f64 {
        self.per_token_logprobs.iter().sum()
    }
}

fn banned(id: u32, produced: usize, cfg: &DecodeConfig) -> bool {
    matches!(id, PAD_ID | CTX_CTRL_ID | CW_ID | RESP_ID) || (id == EOS_ID && produced < cfg.min_new_tokens)
}

/// Samples or decodes a response after the prompt. Logprobs are recorded under
/// the raw model distribution (temperature 1, no truncation) so they agree
/// with [`sequence_logprob`].
pub fn generate(
    model: &dyn LanguageModel,
    prompt: &PromptEncoding,
    cfg: &DecodeConfig,
    rng: &mut impl Rng,
) -> Result<GenerationResult> {
    cfg.validate()?;
    let mut ids = prompt.token_ids.clone();
    let mut generated = Vec::new();
    let mut logprobs = Vec::new();
    while generated.len() < cfg.max_new_tokens && ids.len() < model.max_sequence_length() {
        let lp = model.last_log_probs(&ids)?;
        let allowed: Vec<usize> = (0..lp.len()).filter(|&i| !banned(i as u32, generated.len(), cfg)).collect();
        let next = match cfg.strategy {
            DecodeStrategy::Greedy => allowed
                .iter()
                .copied()
                .fold(None::<usize>, |best, i| match best {
                    Some(b) if lp[b] >= lp[i] => Some(b),
                    _ => Some(i),
                })
                .expect("vocabulary has allowed tokens"),
            DecodeStrategy::TopP => sample_top_p(&lp, &allowed, cfg.temperature, cfg.top_p, rng),
        };
        ids.push(next as u32);
        generated.push(next as u32);
        logprobs.push(lp[next]);
        if next as u32 == EOS_ID {
            break;
        }
    }
    let visible: Vec<u32> = generated.iter().copied().filter(|&t| t != EOS_ID).collect();
    let text = model.tokenizer().decode(&visible).trim().to_string();
    Ok(GenerationResult {
        empty: text.is_empty(),
        text,
        token_ids: generated,
        per_token_logprobs: logprobs,
        decode_config: cfg.clone(),
    })
}

fn sample_top_p(lp: &[f64], allowed: &[usize], temperature: f64, top_p: f64, rng: &mut impl Rng) -> usize {
    let scaled: Vec<f64> = allowed.iter().map(|&i| lp[i] / temperature).collect();
    let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<(usize, f64)> = allowed
        .iter()
        .zip(&scaled)
        .map(|(&i, &s)| (i, (s - max).exp()))
        .collect();
    let z: f64 = probs.iter().map(|p| p.1).sum();
    probs.iter_mut().for_each(|p| p.1 /= z);
    probs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut cum = 0.0;
    let mut keep = 0;
    for (k, p) in probs.iter().enumerate() {
        cum += p.1;
        keep = k + 1;
        if cum >= top_p {
            break;
        }
    }
    let nucleus = &probs[..keep];
    let mass: f64 = nucleus.iter().map(|p| p.1).sum();
    let mut u = rng.random::<f64>() * mass;
    for &(i, p) in nucleus {
        if u < p {
            return i;
        }
        u -= p;
    }
    nucleus[keep - 1].0
}

/// Per-token log P(target_t | prompt, target_<t).
pub fn token_logprobs(model: &dyn LanguageModel, prompt: &PromptEncoding, target: &[u32]) -> Result<Vec<f64>> {
    if target.is_empty() {
        return Ok(Vec::new());
    }
    let len = prompt.token_ids.len() + target.len();
    if len > model.max_sequence_length() {
        return Err(Error::Length {
            len,
            max: model.max_sequence_length(),
        });
    }
    let v = model.tokenizer().vocab_size();
    if let Some(bad) = target.iter().chain(&prompt.token_ids).find(|&&t| t as usize >= v) {
        return Err(Error::invalid(format!("token id {bad} outside vocabulary of {v}")));
    }
    let mut ids = prompt.token_ids.clone();
    ids.extend_from_slice(target);
    let rows = model.next_token_log_probs(&ids[..len - 1])?;
    let start = prompt.token_ids.len() - 1;
    Ok(target
        .iter()
        .enumerate()
        .map(|(t, &tok)| rows[start + t][tok as usize])
        .collect())
}

/// Σ_t log P(target_t | prompt, target_<t).
pub fn sequence_logprob(model: &dyn LanguageModel, prompt: &PromptEncoding, target: &[u32]) -> Result<f64> {
    Ok(token_logprobs(model, prompt, target)?.iter().sum())
}

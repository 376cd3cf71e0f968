use candle_core::{Tensor, Var, D};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::reward::{kl_penalized_reward, AdaptiveKl};
use crate::corpus::Sample;
use crate::generator::{
    generate, prompt_for_sample, token_logprobs, DecodeConfig, GenerationResult, LanguageModel, PromptEncoding,
    PromptLimits, PromptRecipe, TinyTransformer,
};
use crate::metrics::{Evaluator, ScoreBreakdown};
use crate::seed::{rng_for, SeededRng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlConfig {
    pub total_steps: usize,
    pub batch_size: usize,
    pub ppo_epochs: usize,
    pub minibatches_per_batch: usize,
    pub kl_beta: f64,
    pub clip_epsilon: f64,
    pub learning_rate: f64,
    pub value_learning_rate: f64,
    /// Subtract the value head's prediction from the whitened shaped reward.
    pub value_baseline: bool,
    /// Abort when the update's approximate KL stays above this for 10 steps.
    pub kl_ceiling: f64,
    pub adaptive_kl: Option<AdaptiveKl>,
    pub seed: u64,
    pub response_budget: usize,
    pub recipe: PromptRecipe,
    pub decode: DecodeConfig,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            total_steps: 400,
            batch_size: 8,
            ppo_epochs: 4,
            minibatches_per_batch: 1,
            kl_beta: 0.1,
            clip_epsilon: 0.2,
            learning_rate: 1e-3,
            value_learning_rate: 1e-2,
            value_baseline: true,
            kl_ceiling: 1.0,
            adaptive_kl: None,
            seed: 0,
            response_budget: 64,
            recipe: PromptRecipe {
                sampling: Some((0.5, 1.0)),
                ..PromptRecipe::default()
            },
            decode: DecodeConfig::default(),
        }
    }
}

pub const DIVERGENCE_PATIENCE: usize = 10;

impl RlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 || self.batch_size == 0 || self.ppo_epochs == 0 {
            return Err(Error::invalid("total_steps, batch_size and ppo_epochs must be at least 1"));
        }
        if self.minibatches_per_batch == 0 || self.minibatches_per_batch > self.batch_size {
            return Err(Error::invalid("minibatches_per_batch must be in 1..=batch_size"));
        }
        if self.kl_beta < 0.0 || self.clip_epsilon <= 0.0 {
            return Err(Error::invalid("kl_beta must be non-negative and clip_epsilon positive"));
        }
        self.recipe.validate()?;
        self.decode.validate()
    }
}

/// What the policy is asked to respond to, with what the evaluator needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptItem {
    pub sample_id: String,
    pub context: String,
    pub actual: String,
    pub prompt: PromptEncoding,
}

/// Supplies a batch of prompts for each training step.
pub trait PromptSource {
    fn batch(&mut self, step: usize, size: usize) -> Result<Vec<PromptItem>>;
}

/// Cycles through shuffled samples, building prompts with a recipe.
pub struct SamplePromptSource<'a> {
    pub samples: &'a [Sample],
    pub recipe: PromptRecipe,
    pub vocab: &'a [String],
    pub limits: PromptLimits,
    pub tokenizer: &'a crate::generator::Tokenizer,
    pub seed: u64,
    order: Vec<usize>,
    cursor: usize,
    epoch: usize,
}

impl<'a> SamplePromptSource<'a> {
    pub fn new(
        samples: &'a [Sample],
        recipe: PromptRecipe,
        vocab: &'a [String],
        limits: PromptLimits,
        tokenizer: &'a crate::generator::Tokenizer,
        seed: u64,
    ) -> Self {
        SamplePromptSource {
            samples,
            recipe,
            vocab,
            limits,
            tokenizer,
            seed,
            order: Vec::new(),
            cursor: 0,
            epoch: 0,
        }
    }

    pub fn item(&self, sample: &Sample, rng: &mut SeededRng) -> Result<PromptItem> {
        Ok(PromptItem {
            sample_id: sample.id.clone(),
            context: sample.context_text(),
            actual: sample.response.clone(),
            prompt: prompt_for_sample(self.tokenizer, sample, &self.recipe, self.vocab, self.limits, rng)?,
        })
    }
}

impl PromptSource for SamplePromptSource<'_> {
    fn batch(&mut self, step: usize, size: usize) -> Result<Vec<PromptItem>> {
        if self.samples.is_empty() {
            return Err(Error::invalid("no prompts to train on"));
        }
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            if self.cursor == self.order.len() {
                self.order = (0..self.samples.len()).collect();
                self.order.shuffle(&mut rng_for(self.seed, &format!("rl-order:{}", self.epoch)));
                self.cursor = 0;
                self.epoch += 1;
            }
            let s = &self.samples[self.order[self.cursor]];
            self.cursor += 1;
            let mut rng = rng_for(self.seed, &format!("rl-prompt:{}:{step}", s.id));
            out.push(self.item(s, &mut rng)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub sample_id: String,
    pub prompt: PromptEncoding,
    pub actual: String,
    pub generation: GenerationResult,
    pub policy_logprobs: Vec<f64>,
    pub ref_logprobs: Vec<f64>,
    pub scores: ScoreBreakdown,
    pub raw_reward: f64,
    pub shaped_reward: f64,
    /// Value-head prediction at rollout time.
    pub value: f64,
}

impl Rollout {
    pub fn log_ratio(&self) -> f64 {
        self.policy_logprobs.iter().sum::<f64>() - self.ref_logprobs.iter().sum::<f64>()
    }
}

pub type RolloutBatch = Vec<Rollout>;

/// Scalar value prediction from the detached hidden state at the response
/// separator.
pub struct ValueHead {
    w: Var,
    b: Var,
}

impl ValueHead {
    pub fn new(d_model: usize) -> Result<Self> {
        Ok(ValueHead {
            w: Var::from_tensor(&crate::generator::const_tensor(&[d_model, 1], 0.0)?)?,
            b: Var::from_tensor(&crate::generator::const_tensor(&[1], 0.0)?)?,
        })
    }

    fn forward(&self, policy: &TinyTransformer, prompt: &PromptEncoding) -> Result<Tensor> {
        let h = policy.forward_hidden(&prompt.token_ids)?.detach();
        let last = h.narrow(0, prompt.token_ids.len() - 1, 1)?;
        Ok(crate::generator::linear(&last, self.w.as_tensor(), self.b.as_tensor())?.flatten_all()?)
    }

    pub fn predict(&self, policy: &TinyTransformer, prompt: &PromptEncoding) -> Result<f64> {
        Ok(self.forward(policy, prompt)?.to_vec1::<f64>()?[0])
    }

    fn vars(&self) -> Vec<Var> {
        vec![self.w.clone(), self.b.clone()]
    }
}

/// Samples one response per prompt from the policy and scores it.
#[allow(clippy::too_many_arguments)]
pub fn collect_rollouts(
    policy: &TinyTransformer,
    reference: &TinyTransformer,
    value_head: Option<&ValueHead>,
    prompts: &[PromptItem],
    evaluator: &dyn Evaluator,
    decode: &DecodeConfig,
    beta: f64,
    rng: &mut SeededRng,
) -> Result<RolloutBatch> {
    if policy.tokenizer() != reference.tokenizer() {
        return Err(Error::invalid("policy and reference use different tokenizers"));
    }
    prompts
        .iter()
        .map(|item| {
            let generation = generate(policy, &item.prompt, decode, rng)?;
            let policy_logprobs = token_logprobs(policy, &item.prompt, &generation.token_ids)?;
            let ref_logprobs = token_logprobs(reference, &item.prompt, &generation.token_ids)?;
            let scores = evaluator
                .evaluate(&item.sample_id, &item.context, &item.actual, &generation.text)
                .map_err(|e| Error::invalid(format!("evaluator failed on sample {}: {e}", item.sample_id)))?;
            let raw_reward = scores.composite;
            let shaped_reward = kl_penalized_reward(
                raw_reward,
                policy_logprobs.iter().sum(),
                ref_logprobs.iter().sum(),
                beta,
            )?;
            let value = match value_head {
                Some(v) => v.predict(policy, &item.prompt)?,
                None => 0.0,
            };
            Ok(Rollout {
                sample_id: item.sample_id.clone(),
                prompt: item.prompt.clone(),
                actual: item.actual.clone(),
                generation,
                policy_logprobs,
                ref_logprobs,
                scores,
                raw_reward,
                shaped_reward,
                value,
            })
        })
        .collect()
}

/// Mean 0, standard deviation 1; all zeros when the spread is negligible.
pub fn whiten(xs: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std < 1e-8 {
        vec![0.0; xs.len()]
    } else {
        xs.iter().map(|x| (x - mean) / std).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

fn sequence_token_logprobs(policy: &TinyTransformer, r: &Rollout) -> Result<Tensor> {
    let mut ids = r.prompt.token_ids.clone();
    ids.extend_from_slice(&r.generation.token_ids);
    let lp = policy.log_probs_tensor(&ids[..ids.len() - 1])?;
    let n = r.generation.token_ids.len();
    let rows = lp.narrow(0, r.prompt.token_ids.len() - 1, n)?;
    let idx = Tensor::new(r.generation.token_ids.as_slice(), lp.device())?.unsqueeze(1)?;
    Ok(rows.gather(&idx, D::Minus1)?.flatten_all()?)
}

/// Clipped-surrogate updates over the batch. Shaped rewards are whitened per
/// batch; the value head regresses onto them and its prediction is subtracted
/// to give the advantage, which every token of a rollout shares. Diagnostics are averaged over the first
/// epoch's minibatches for the ratio statistics and over all passes for losses.
pub fn ppo_update(
    policy: &TinyTransformer,
    value_head: Option<&ValueHead>,
    batch: &RolloutBatch,
    cfg: &RlConfig,
    policy_opt: &mut AdamW,
    value_opt: Option<&mut AdamW>,
    step: usize,
) -> Result<UpdateStats> {
    if batch.is_empty() {
        return Err(Error::invalid("empty rollout batch"));
    }
    let shaped: Vec<f64> = batch.iter().map(|r| r.shaped_reward).collect();
    let returns = whiten(&shaped);
    let advantages: Vec<f64> = returns
        .iter()
        .zip(batch)
        .map(|(g, r)| if cfg.value_baseline { g - r.value } else { *g })
        .collect();
    let mb = cfg.minibatches_per_batch;
    let mb_size = batch.len().div_ceil(mb);
    let mut stats = UpdateStats::default();
    let mut kl_sum = 0.0;
    let mut clipped = 0usize;
    let mut tokens = 0usize;
    let mut passes = 0usize;
    let mut value_opt = value_opt;
    for epoch in 0..cfg.ppo_epochs {
        for (m, chunk) in batch.chunks(mb_size).enumerate() {
            let offset = m * mb_size;
            let mut total: Option<Tensor> = None;
            let mut n_tok = 0usize;
            for (k, r) in chunk.iter().enumerate() {
                let new = sequence_token_logprobs(policy, r)?;
                let old = Tensor::new(r.policy_logprobs.as_slice(), new.device())?;
                let ratio = new.sub(&old)?.exp()?;
                let a = advantages[offset + k];
                let unclipped = ratio.affine(a, 0.0)?;
                let clipped_t = ratio.clamp(1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon)?.affine(a, 0.0)?;
                let surrogate = unclipped.minimum(&clipped_t)?.sum_all()?.neg()?;
                total = Some(match total {
                    Some(t) => t.add(&surrogate)?,
                    None => surrogate,
                });
                n_tok += r.generation.token_ids.len();
                if epoch == 0 {
                    let diffs: Vec<f64> = new.sub(&old)?.to_vec1()?;
                    for d in diffs {
                        kl_sum += 0.5 * d * d;
                        clipped += ((d.exp() - 1.0).abs() > cfg.clip_epsilon) as usize;
                        tokens += 1;
                    }
                }
            }
            let loss = total.expect("non-empty minibatch").affine(1.0 / n_tok as f64, 0.0)?;
            let lv = loss.to_scalar::<f64>()?;
            if !lv.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step,
                    batch: m,
                    detail: format!("policy loss {lv} in PPO epoch {epoch}"),
                });
            }
            policy_opt.backward_step(&loss)?;
            stats.policy_loss += lv;
            if let (Some(vh), Some(vopt)) = (value_head, value_opt.as_deref_mut()) {
                let mut vl: Option<Tensor> = None;
                for (k, r) in chunk.iter().enumerate() {
                    let diff = vh.forward(policy, &r.prompt)?.affine(1.0, -returns[offset + k])?.sqr()?.sum_all()?;
                    vl = Some(match vl {
                        Some(t) => t.add(&diff)?,
                        None => diff,
                    });
                }
                let vl = vl.expect("non-empty minibatch").affine(0.5 / chunk.len() as f64, 0.0)?;
                stats.value_loss += vl.to_scalar::<f64>()?;
                vopt.backward_step(&vl)?;
            }
            passes += 1;
        }
    }
    stats.policy_loss /= passes as f64;
    stats.value_loss /= passes as f64;
    stats.approx_kl = kl_sum / tokens.max(1) as f64;
    stats.clip_fraction = clipped as f64 / tokens.max(1) as f64;
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub step: usize,
    pub mean_raw_reward: f64,
    pub mean_shaped_reward: f64,
    /// Mean sequence log π(Ŷ) − log P(Ŷ) over the batch.
    pub mean_log_ratio: f64,
    pub beta: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlReport {
    pub curve: Vec<StepStats>,
    pub reference_hash: String,
    pub final_beta: f64,
}

impl RlReport {
    /// `step,mean_raw_reward,mean_shaped_reward,approx_kl,clip_fraction` rows.
    pub fn curve_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["step", "mean_raw_reward", "mean_shaped_reward", "approx_kl", "clip_fraction"])?;
        for s in &self.curve {
            w.write_record([
                s.step.to_string(),
                s.mean_raw_reward.to_string(),
                s.mean_shaped_reward.to_string(),
                s.approx_kl.to_string(),
                s.clip_fraction.to_string(),
            ])?;
        }
        w.into_inner().map_err(|e| Error::invalid(e.to_string()))
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n.max(1) as f64
}

/// Runs `total_steps` of collect → update. The reference model is a frozen
/// copy of the initial policy; its parameter hash is checked every step.
pub fn train_rl(
    policy: &mut TinyTransformer,
    source: &mut dyn PromptSource,
    evaluator: &dyn Evaluator,
    cfg: &RlConfig,
) -> Result<RlReport> {
    cfg.validate()?;
    let reference = policy.deep_clone()?;
    let reference_hash = reference.params().hash()?;
    let value_head = if cfg.value_baseline {
        Some(ValueHead::new(policy.d_model())?)
    } else {
        None
    };
    let mut policy_opt = AdamW::new(
        policy.params().vars(),
        ParamsAdamW {
            lr: cfg.learning_rate,
            weight_decay: 0.0,
            ..ParamsAdamW::default()
        },
    )?;
    let mut value_opt = match &value_head {
        Some(v) => Some(AdamW::new(
            v.vars(),
            ParamsAdamW {
                lr: cfg.value_learning_rate,
                weight_decay: 0.0,
                ..ParamsAdamW::default()
            },
        )?),
        None => None,
    };
    let mut beta = cfg.kl_beta;
    let mut curve = Vec::with_capacity(cfg.total_steps);
    let mut over_ceiling = 0usize;
    for step in 1..=cfg.total_steps {
        let prompts = source.batch(step, cfg.batch_size)?;
        let mut rng = rng_for(cfg.seed, &format!("rl-rollout:{step}"));
        let decode = DecodeConfig {
            seed: cfg.seed,
            ..cfg.decode.clone()
        };
        let batch = collect_rollouts(
            policy,
            &reference,
            value_head.as_ref(),
            &prompts,
            evaluator,
            &decode,
            beta,
            &mut rng,
        )?;
        let update = ppo_update(
            policy,
            value_head.as_ref(),
            &batch,
            cfg,
            &mut policy_opt,
            value_opt.as_mut(),
            step,
        )?;
        if reference.params().hash()? != reference_hash {
            return Err(Error::Diverged {
                step,
                detail: "reference model parameters changed".into(),
            });
        }
        let stats = StepStats {
            step,
            mean_raw_reward: mean(batch.iter().map(|r| r.raw_reward)),
            mean_shaped_reward: mean(batch.iter().map(|r| r.shaped_reward)),
            mean_log_ratio: mean(batch.iter().map(Rollout::log_ratio)),
            beta,
            approx_kl: update.approx_kl,
            clip_fraction: update.clip_fraction,
            policy_loss: update.policy_loss,
            value_loss: update.value_loss,
        };
        log::info!(
            "rl step {step}: reward {:.4} shaped {:.4} kl {:.5} clip {:.3}",
            stats.mean_raw_reward,
            stats.mean_shaped_reward,
            stats.approx_kl,
            stats.clip_fraction
        );
        over_ceiling = if stats.approx_kl > cfg.kl_ceiling { over_ceiling + 1 } else { 0 };
        if over_ceiling >= DIVERGENCE_PATIENCE {
            return Err(Error::Diverged {
                step,
                detail: format!(
                    "approx KL above {} for {DIVERGENCE_PATIENCE} consecutive steps (last {:.4})",
                    cfg.kl_ceiling, stats.approx_kl
                ),
            });
        }
        if let Some(ctrl) = &cfg.adaptive_kl {
            beta = ctrl.update(beta, stats.mean_log_ratio, cfg.batch_size);
        }
        curve.push(stats);
    }
    Ok(RlReport {
        curve,
        reference_hash,
        final_beta: beta,
    })
}

/// Mean composite reward of `samples_per_prompt` generations per prompt.
pub fn mean_reward(
    policy: &dyn LanguageModel,
    prompts: &[PromptItem],
    evaluator: &dyn Evaluator,
    decode: &DecodeConfig,
    samples_per_prompt: usize,
    seed: u64,
) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for (i, item) in prompts.iter().enumerate() {
        let mut rng = rng_for(seed, &format!("mean-reward:{i}"));
        for _ in 0..samples_per_prompt {
            let g = generate(policy, &item.prompt, decode, &mut rng)?;
            total += evaluator.evaluate(&item.sample_id, &item.context, &item.actual, &g.text)?.composite;
            n += 1;
        }
    }
    Ok(total / n.max(1) as f64)
}

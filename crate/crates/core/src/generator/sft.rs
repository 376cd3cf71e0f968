//! Supervised fine-tuning: token-level negative log-likelihood of the true
//! response given the prompt, with the loss restricted to the response region.

use candle_core::{Tensor, D};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::TinyTransformer;
use super::prompt::{PromptEncoding, PromptLimits};
use super::recipe::{prompt_for_sample, PromptRecipe};
use super::tokenizer::EOS_ID;
use super::LanguageModel;
use crate::corpus::Sample;
use crate::seed::rng_for;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub eval_interval: usize,
    pub seed: u64,
    pub response_budget: usize,
    pub recipe: PromptRecipe,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 200,
            batch_size: 8,
            learning_rate: 3e-3,
            weight_decay: 0.0,
            eval_interval: 50,
            seed: 0,
            response_budget: 64,
            recipe: PromptRecipe::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub steps: usize,
    pub final_train_loss: Option<f64>,
    pub final_val_loss: Option<f64>,
    pub curve: Vec<CurvePoint>,
}

impl TrainReport {
    /// `step,train_loss,val_loss` rows; validation cells are empty between evaluations.
    pub fn curve_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["step", "train_loss", "val_loss"])?;
        for p in &self.curve {
            w.write_record([
                p.step.to_string(),
                p.train_loss.to_string(),
                p.val_loss.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        w.into_inner().map_err(|e| Error::invalid(e.to_string()))
    }
}

/// A prompt and the response tokens it should produce (end-of-text included).
#[derive(Debug, Clone)]
pub struct SftExample {
    pub prompt: PromptEncoding,
    pub target: Vec<u32>,
}

pub fn response_target(model: &dyn LanguageModel, response: &str) -> Vec<u32> {
    let mut t = model.tokenizer().encode_plain(response);
    t.push(EOS_ID);
    t
}

pub fn sft_example(
    model: &dyn LanguageModel,
    sample: &Sample,
    recipe: &PromptRecipe,
    vocab: &[String],
    response_budget: usize,
    rng: &mut impl rand::Rng,
) -> Result<SftExample> {
    let limits = PromptLimits {
        max_sequence_length: model.max_sequence_length(),
        response_budget,
    };
    let prompt = prompt_for_sample(model.tokenizer(), sample, recipe, vocab, limits, rng)?;
    let target = response_target(model, &sample.response);
    let len = prompt.token_ids.len() + target.len();
    if len > model.max_sequence_length() {
        return Err(Error::Length {
            len,
            max: model.max_sequence_length(),
        });
    }
    Ok(SftExample { prompt, target })
}

/// Summed negative log-likelihood of the target tokens, as a differentiable scalar.
pub fn example_nll(model: &TinyTransformer, ex: &SftExample) -> Result<Tensor> {
    let mut ids = ex.prompt.token_ids.clone();
    ids.extend_from_slice(&ex.target);
    let lp = model.log_probs_tensor(&ids[..ids.len() - 1])?;
    let rows = lp.narrow(0, ex.prompt.token_ids.len() - 1, ex.target.len())?;
    let idx = Tensor::new(ex.target.as_slice(), lp.device())?.unsqueeze(1)?;
    Ok(rows.gather(&idx, D::Minus1)?.sum_all()?.neg()?)
}

/// Mean per-token NLL over a set of examples.
pub fn mean_token_nll(model: &TinyTransformer, examples: &[SftExample]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for ex in examples {
        total += example_nll(model, ex)?.to_scalar::<f64>()?;
        count += ex.target.len();
    }
    Ok(if count == 0 { f64::NAN } else { total / count as f64 })
}

/// Builds the fixed validation prompts used for every evaluation snapshot.
pub fn validation_examples(
    model: &dyn LanguageModel,
    val: &[Sample],
    cfg: &TrainConfig,
    vocab: &[String],
) -> Result<Vec<SftExample>> {
    val.iter()
        .map(|s| {
            let mut rng = rng_for(cfg.seed, &format!("sft-val:{}", s.id));
            sft_example(model, s, &cfg.recipe, vocab, cfg.response_budget, &mut rng)
        })
        .collect()
}

/// Fine-tunes `model` in place. Prompts are rebuilt every epoch so that
/// sampled and corrupted control words vary between epochs.
pub fn sft_train(
    model: &mut TinyTransformer,
    train: &[Sample],
    val: &[Sample],
    vocab: &[String],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.recipe.validate()?;
    if cfg.batch_size == 0 || cfg.eval_interval == 0 {
        return Err(Error::invalid("batch_size and eval_interval must be positive"));
    }
    if cfg.steps > 0 && train.is_empty() {
        return Err(Error::invalid("no training samples"));
    }
    let val_examples = validation_examples(model, val, cfg, vocab)?;
    let mut opt = AdamW::new(
        model.params().vars(),
        ParamsAdamW {
            lr: cfg.learning_rate,
            weight_decay: cfg.weight_decay,
            ..ParamsAdamW::default()
        },
    )?;
    let mut report = TrainReport {
        steps: cfg.steps,
        final_train_loss: None,
        final_val_loss: None,
        curve: Vec::new(),
    };
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut epoch = 0usize;
    for step in 1..=cfg.steps {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        while batch.len() < cfg.batch_size.min(train.len()) {
            if cursor == order.len() {
                order = (0..train.len()).collect();
                order.shuffle(&mut rng_for(cfg.seed, &format!("sft-order:{epoch}")));
                cursor = 0;
                epoch += 1;
            }
            let s = &train[order[cursor]];
            cursor += 1;
            let mut rng = rng_for(cfg.seed, &format!("sft-prompt:{}:{}", s.id, epoch - 1));
            batch.push(sft_example(model, s, &cfg.recipe, vocab, cfg.response_budget, &mut rng)?);
        }
        let tokens: usize = batch.iter().map(|e| e.target.len()).sum();
        let mut total: Option<Tensor> = None;
        for ex in &batch {
            let nll = example_nll(model, ex)?;
            total = Some(match total {
                Some(t) => t.add(&nll)?,
                None => nll,
            });
        }
        let loss = total.expect("non-empty batch").affine(1.0 / tokens as f64, 0.0)?;
        let value = loss.to_scalar::<f64>()?;
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss {
                step,
                batch: step - 1,
                detail: format!(
                    "loss {value} in epoch {} over samples [{}]",
                    epoch - 1,
                    batch_ids(train, &order, cursor, batch.len()).join(", ")
                ),
            });
        }
        opt.backward_step(&loss)?;
        let val_loss = if step % cfg.eval_interval == 0 || step == cfg.steps {
            if val_examples.is_empty() {
                None
            } else {
                Some(mean_token_nll(model, &val_examples)?)
            }
        } else {
            None
        };
        if let Some(v) = val_loss {
            log::info!("sft step {step}: train {value:.4} val {v:.4}");
            report.final_val_loss = Some(v);
        }
        report.final_train_loss = Some(value);
        report.curve.push(CurvePoint {
            step,
            train_loss: value,
            val_loss,
        });
    }
    Ok(report)
}

fn batch_ids(train: &[Sample], order: &[usize], cursor: usize, n: usize) -> Vec<String> {
    order[cursor.saturating_sub(n)..cursor]
        .iter()
        .map(|&i| train[i].id.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Speaker, Turn};
    use crate::generator::{TinyConfig, Tokenizer};

    fn sample() -> Sample {
        Sample {
            id: "c1:1".into(),
            conversation_id: "c1".into(),
            context: vec![Turn {
                speaker: Speaker::Customer,
                text: "where is my order".into(),
                index: 0,
            }],
            control_words: vec!["order".into(), "arrive".into()],
            response: "your order will arrive soon".into(),
            response_index: 1,
        }
    }

    fn model() -> TinyTransformer {
        let tok = Tokenizer::build(["customer: where is my order", "your order will arrive soon"], 1, 100);
        TinyTransformer::new(TinyConfig::default(), tok).unwrap()
    }

    #[test]
    fn zero_steps_leaves_parameters() {
        let mut m = model();
        let before = m.params().hash().unwrap();
        let cfg = TrainConfig {
            steps: 0,
            ..TrainConfig::default()
        };
        let r = sft_train(&mut m, &[sample()], &[], &[], &cfg).unwrap();
        assert_eq!(m.params().hash().unwrap(), before);
        assert!(r.curve.is_empty());
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let mut m = model();
        let before = m.params().hash().unwrap();
        let cfg = TrainConfig {
            steps: 3,
            batch_size: 1,
            learning_rate: 0.0,
            weight_decay: 0.1,
            ..TrainConfig::default()
        };
        sft_train(&mut m, &[sample()], &[], &[], &cfg).unwrap();
        assert_eq!(m.params().hash().unwrap(), before);
    }

    #[test]
    fn overfits_one_sample() {
        let mut m = model();
        let cfg = TrainConfig {
            steps: 40,
            batch_size: 1,
            learning_rate: 1e-2,
            eval_interval: 10,
            ..TrainConfig::default()
        };
        let r = sft_train(&mut m, &[sample()], &[sample()], &[], &cfg).unwrap();
        let vals: Vec<f64> = r.curve.iter().filter_map(|p| p.val_loss).collect();
        assert_eq!(vals.len(), 4);
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
    }

    #[test]
    fn loss_matches_sequence_logprob() {
        let m = model();
        let mut rng = rng_for(0, "t");
        let ex = sft_example(&m, &sample(), &PromptRecipe::default(), &[], 64, &mut rng).unwrap();
        let nll = example_nll(&m, &ex).unwrap().to_scalar::<f64>().unwrap();
        let lp = crate::generator::sequence_logprob(&m, &ex.prompt, &ex.target).unwrap();
        assert!((nll + lp).abs() < 1e-9);
    }
}

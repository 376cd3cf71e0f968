//! How a sample becomes a prompt: which parts are included and how the control
//! words are perturbed. The same recipe is applied at training and at
//! evaluation time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::prompt::{assemble_prompt, PromptEncoding, PromptLimits, SeparatorScheme};
use super::tokenizer::Tokenizer;
use crate::controlwords::{corrupt_control_words, order_for_prompt, sample_control_words, ControlWordSet};
use crate::corpus::Sample;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptRecipe {
    pub use_context: bool,
    pub use_controls: bool,
    /// Fraction of control words replaced by random vocabulary words.
    pub corruption: Option<f64>,
    /// Sampling rate range; a rate is drawn uniformly from it per prompt.
    pub sampling: Option<(f64, f64)>,
}

impl Default for PromptRecipe {
    fn default() -> Self {
        PromptRecipe {
            use_context: true,
            use_controls: true,
            corruption: None,
            sampling: None,
        }
    }
}

impl PromptRecipe {
    pub fn validate(&self) -> Result<()> {
        if !self.use_controls && (self.corruption.is_some() || self.sampling.is_some()) {
            return Err(Error::invalid("corruption/sampling require control words"));
        }
        if let Some(f) = self.corruption {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::invalid(format!("corruption fraction {f} outside [0, 1]")));
            }
        }
        if let Some((lo, hi)) = self.sampling {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(Error::invalid(format!("sampling range ({lo}, {hi}) invalid")));
            }
        }
        Ok(())
    }
}

/// Applies sampling, then corruption, then a random order.
pub fn prepare_controls(
    sample: &Sample,
    recipe: &PromptRecipe,
    vocab: &[String],
    rng: &mut impl Rng,
) -> Result<Vec<String>> {
    if !recipe.use_controls {
        return Ok(Vec::new());
    }
    let mut set = ControlWordSet::new(sample.control_words.clone(), sample.id.clone());
    if let Some((lo, hi)) = recipe.sampling {
        let rate = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        set = sample_control_words(&set, rate, rng)?;
    }
    if let Some(fraction) = recipe.corruption {
        set = corrupt_control_words(&set, vocab, fraction, rng)?;
    }
    Ok(order_for_prompt(&set, rng))
}

pub fn prompt_for_sample(
    tokenizer: &Tokenizer,
    sample: &Sample,
    recipe: &PromptRecipe,
    vocab: &[String],
    limits: PromptLimits,
    rng: &mut impl Rng,
) -> Result<PromptEncoding> {
    let controls = prepare_controls(sample, recipe, vocab, rng)?;
    let context = if recipe.use_context {
        sample.context_lines()
    } else {
        Vec::new()
    };
    assemble_prompt(tokenizer, &context, &controls, SeparatorScheme::default(), limits)
}

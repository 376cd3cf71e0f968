//! The baseline grid: named prompt recipes run against a checkpoint.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::corpus::Sample;
use crate::generator::{generate, prompt_for_sample, DecodeConfig, GenerationRecord, LanguageModel, PromptLimits, PromptRecipe};
use crate::metrics::{Evaluator, ScoreBreakdown};
use crate::seed::rng_for;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproachName {
    Pretrained,
    OnlyContext,
    OnlyControlWords,
    ContextAndControl,
    ContextControlNoise,
    ContextControlSampling,
    RlFinetuned,
}

impl ApproachName {
    pub const ALL: [ApproachName; 7] = [
        ApproachName::Pretrained,
        ApproachName::OnlyContext,
        ApproachName::OnlyControlWords,
        ApproachName::ContextAndControl,
        ApproachName::ContextControlNoise,
        ApproachName::ContextControlSampling,
        ApproachName::RlFinetuned,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ApproachName::Pretrained => "pretrained",
            ApproachName::OnlyContext => "only_context",
            ApproachName::OnlyControlWords => "only_control_words",
            ApproachName::ContextAndControl => "context_and_control",
            ApproachName::ContextControlNoise => "context_control_noise",
            ApproachName::ContextControlSampling => "context_control_sampling",
            ApproachName::RlFinetuned => "rl_finetuned",
        }
    }

    pub fn default_recipe(self) -> PromptRecipe {
        let both = PromptRecipe::default();
        match self {
            ApproachName::Pretrained | ApproachName::OnlyContext => PromptRecipe {
                use_controls: false,
                ..both
            },
            ApproachName::OnlyControlWords => PromptRecipe {
                use_context: false,
                ..both
            },
            ApproachName::ContextAndControl => both,
            ApproachName::ContextControlNoise => PromptRecipe {
                corruption: Some(0.5),
                ..both
            },
            ApproachName::ContextControlSampling | ApproachName::RlFinetuned => PromptRecipe {
                sampling: Some((0.5, 1.0)),
                ..both
            },
        }
    }

    /// Whether a recipe is compatible with what the approach name promises.
    pub fn check_recipe(self, r: &PromptRecipe) -> Result<()> {
        r.validate()?;
        let ok = match self {
            ApproachName::Pretrained | ApproachName::OnlyContext => r.use_context && !r.use_controls,
            ApproachName::OnlyControlWords => !r.use_context && r.use_controls,
            ApproachName::ContextAndControl => r.use_context && r.use_controls && r.corruption.is_none() && r.sampling.is_none(),
            ApproachName::ContextControlNoise => r.use_context && r.use_controls && r.corruption.is_some(),
            ApproachName::ContextControlSampling => r.use_context && r.use_controls && r.sampling.is_some(),
            ApproachName::RlFinetuned => r.use_context,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("recipe {r:?} is inconsistent with approach {}", self.as_str())))
        }
    }
}

impl std::fmt::Display for ApproachName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproachSpec {
    pub name: ApproachName,
    /// Model directory to generate with.
    pub checkpoint: PathBuf,
    /// Defaults to the approach's standard recipe.
    #[serde(default)]
    pub recipe: Option<PromptRecipe>,
}

impl ApproachSpec {
    pub fn recipe(&self) -> PromptRecipe {
        self.recipe.clone().unwrap_or_else(|| self.name.default_recipe())
    }

    pub fn validate(&self) -> Result<()> {
        self.name.check_recipe(&self.recipe())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachOutput {
    pub generation: GenerationRecord,
    pub scores: ScoreBreakdown,
}

/// Generates one response per sample and scores it. The prompt and the
/// decoding of each sample use their own named seed.
#[allow(clippy::too_many_arguments)]
pub fn run_approach(
    name: ApproachName,
    recipe: &PromptRecipe,
    model: &dyn LanguageModel,
    samples: &[Sample],
    vocab: &[String],
    evaluator: &dyn Evaluator,
    decode: &DecodeConfig,
    response_budget: usize,
    seed: u64,
) -> Result<Vec<ApproachOutput>> {
    name.check_recipe(recipe)?;
    let limits = PromptLimits {
        max_sequence_length: model.max_sequence_length(),
        response_budget,
    };
    samples
        .iter()
        .map(|s| {
            let mut rng = rng_for(seed, &format!("eval:{name}:{}", s.id));
            let prompt = prompt_for_sample(model.tokenizer(), s, recipe, vocab, limits, &mut rng)?;
            let g = generate(model, &prompt, decode, &mut rng)?;
            let scores = evaluator.evaluate(&s.id, &s.context_text(), &s.response, &g.text)?;
            Ok(ApproachOutput {
                generation: GenerationRecord::new(&s.id, &g),
                scores,
            })
        })
        .collect()
}

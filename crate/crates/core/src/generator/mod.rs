//! Autoregressive generator: tokenizer, prompt layout, model backends,
//! supervised fine-tuning and decoding.

mod decode;
mod model;
mod prompt;
mod recipe;
mod sft;
pub mod tokenizer;

pub use decode::{generate, sequence_logprob, token_logprobs, DecodeConfig, DecodeStrategy, GenerationRecord, GenerationResult};
pub use model::{ParamStore, TinyConfig, TinyTransformer, MODEL_FAMILY};
pub use prompt::{assemble_prompt, PromptEncoding, PromptLimits, SeparatorScheme};
pub use recipe::{prepare_controls, prompt_for_sample, PromptRecipe};
pub use sft::{example_nll, mean_token_nll, response_target, sft_example, sft_train, CurvePoint, SftExample, TrainConfig, TrainReport};
pub use tokenizer::Tokenizer;

pub(crate) use model::{const_tensor, linear};

use crate::Result;

/// The contract every generator backend satisfies.
pub trait LanguageModel: Send + Sync {
    fn tokenizer(&self) -> &Tokenizer;

    fn max_sequence_length(&self) -> usize;

    /// Row `t` holds log P(next token | ids[..=t]) over the whole vocabulary.
    fn next_token_log_probs(&self, ids: &[u32]) -> Result<Vec<Vec<f64>>>;

    fn last_log_probs(&self, ids: &[u32]) -> Result<Vec<f64>> {
        let mut rows = self.next_token_log_probs(ids)?;
        Ok(rows.pop().unwrap_or_default())
    }
}

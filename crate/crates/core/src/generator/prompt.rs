use serde::{Deserialize, Serialize};

use super::tokenizer::{Tokenizer, CTX_CTRL_ID, CW_ID, RESP_ID};
use crate::{Error, Result};

/// Token ids used as separators in the prompt layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparatorScheme {
    pub context_control: u32,
    pub control_word: u32,
    pub response: u32,
}

impl Default for SeparatorScheme {
    fn default() -> Self {
        SeparatorScheme {
            context_control: CTX_CTRL_ID,
            control_word: CW_ID,
            response: RESP_ID,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptLimits {
    pub max_sequence_length: usize,
    /// Tokens reserved for the response after the prompt.
    pub response_budget: usize,
}

impl PromptLimits {
    pub fn max_prompt_tokens(&self) -> usize {
        self.max_sequence_length.saturating_sub(self.response_budget)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptEncoding {
    pub token_ids: Vec<u32>,
    /// Index where the response region begins (one past the response separator).
    pub boundary: usize,
}

/// Lays out `turn_1 \n … \n turn_n ⟦CTX_CTRL⟧ w_1 ⟦CW⟧ … ⟦CW⟧ w_k ⟦RESP⟧`.
/// Without control words the control region and its separator are omitted.
pub fn assemble_prompt(
    tokenizer: &Tokenizer,
    context_lines: &[String],
    control_words: &[String],
    scheme: SeparatorScheme,
    limits: PromptLimits,
) -> Result<PromptEncoding> {
    let mut ids = tokenizer.encode_plain(&context_lines.join("\n"));
    if !control_words.is_empty() {
        ids.push(scheme.context_control);
        for (i, w) in control_words.iter().enumerate() {
            if i > 0 {
                ids.push(scheme.control_word);
            }
            ids.extend(tokenizer.encode_plain(w));
        }
    }
    ids.push(scheme.response);
    let max = limits.max_prompt_tokens();
    if ids.len() > max {
        return Err(Error::Length { len: ids.len(), max });
    }
    let boundary = ids.len();
    Ok(PromptEncoding {
        token_ids: ids,
        boundary,
    })
}

//! `manifest.json` files written next to every artifact directory.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::generator::tokenizer::{CTX_CTRL, CW, EOS, PAD, RESP};
use crate::Result;

/// Version string of the code that produced an artifact.
pub fn code_version() -> String {
    match option_env!("CTXPARA_GIT_DESCRIBE") {
        Some(g) if !g.is_empty() => format!("{} ({g})", env!("CARGO_PKG_VERSION")),
        _ => env!("CARGO_PKG_VERSION").to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub seed: u64,
    pub code_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokenizer_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub special_tokens: Vec<String>,
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub summary: serde_json::Map<String, serde_json::Value>,
}

impl Manifest {
    pub fn new(kind: &str, seed: u64, config: &impl Serialize) -> Result<Self> {
        Ok(Manifest {
            kind: kind.to_string(),
            seed,
            code_version: code_version(),
            model_family: None,
            tokenizer_id: None,
            special_tokens: Vec::new(),
            config: serde_json::to_value(config)?,
            summary: serde_json::Map::new(),
        })
    }

    pub fn with_model(mut self, family: &str, tokenizer_id: &str) -> Self {
        self.model_family = Some(family.to_string());
        self.tokenizer_id = Some(tokenizer_id.to_string());
        self.special_tokens = [PAD, EOS, CTX_CTRL, CW, RESP].iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Result<Self> {
        self.summary.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(self)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        crate::io::write_json(&dir.join("manifest.json"), self)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        crate::io::read_json(&dir.join("manifest.json"))
    }
}

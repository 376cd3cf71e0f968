//! The run configuration: one TOML file covering every stage. All per-stage
//! seeds are derived from the global `seed` and a fixed stage name, so they
//! cannot be set individually.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::DEFAULT_WINDOW;
use crate::entailment::EntailmentTrainConfig;
use crate::fluency::FluencyConfig;
use crate::generator::{DecodeConfig, TinyConfig, TrainConfig};
use crate::metrics::{BleuConfig, HashTokenEmbedder};
use crate::rl::RlConfig;
use crate::seed::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub window: usize,
    /// Defaults to the model length minus the response budget and a
    /// reserve for the control-word region.
    pub max_context_tokens: Option<usize>,
    pub control_reserve: usize,
    pub train_fraction: f64,
    pub tokenizer_min_count: usize,
    pub tokenizer_max_words: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            window: DEFAULT_WINDOW,
            max_context_tokens: None,
            control_reserve: 48,
            train_fraction: 0.8,
            tokenizer_min_count: 1,
            tokenizer_max_words: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlsConfig {
    pub tagger: String,
}

impl Default for ControlsConfig {
    fn default() -> Self {
        ControlsConfig {
            tagger: format!("{}@{}", crate::controlwords::LEXRULES_NAME, crate::controlwords::LEXRULES_VERSION),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub bleu: BleuConfig,
    pub embedder: HashTokenEmbedder,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub corpus: CorpusConfig,
    pub controls: ControlsConfig,
    pub model: TinyConfig,
    pub sft: TrainConfig,
    pub entailment: EntailmentTrainConfig,
    pub fluency: FluencyConfig,
    pub decode: DecodeConfig,
    pub metrics: MetricsConfig,
    pub rl: RlConfig,
}

/// Keys that are valid but absent from the serialized defaults.
const OPTIONAL_KEYS: &[&str] = &[
    "corpus.max_context_tokens",
    "sft.recipe.corruption",
    "sft.recipe.sampling",
    "rl.recipe.corruption",
    "rl.adaptive_kl",
    "rl.adaptive_kl.target",
    "rl.adaptive_kl.horizon",
];

/// Keys filled from the global seed.
const DERIVED_KEYS: &[&str] = &[
    "model.init_seed",
    "sft.seed",
    "entailment.seed",
    "entailment.encoder.init_seed",
    "decode.seed",
    "rl.seed",
    "rl.decode.seed",
];

fn collect_keys(prefix: &str, v: &toml::Value, out: &mut BTreeSet<String>) {
    if let toml::Value::Table(t) = v {
        for (k, child) in t {
            let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            collect_keys(&path, child, out);
            out.insert(path);
        }
    }
}

fn allowed_keys() -> BTreeSet<String> {
    let defaults = toml::Value::try_from(RunConfig::default()).expect("defaults serialize");
    let mut keys = BTreeSet::new();
    collect_keys("", &defaults, &mut keys);
    keys.extend(OPTIONAL_KEYS.iter().map(|s| s.to_string()));
    for k in DERIVED_KEYS {
        keys.remove(*k);
    }
    keys
}

fn unknown_keys(prefix: &str, v: &toml::Value, allowed: &BTreeSet<String>, out: &mut Vec<String>) {
    if let toml::Value::Table(t) = v {
        for (k, child) in t {
            let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            if !allowed.contains(&path) {
                let why = if DERIVED_KEYS.contains(&path.as_str()) {
                    "is derived from the global seed and cannot be set"
                } else {
                    "is not a recognised key"
                };
                out.push(format!("{path}: {why}"));
            } else {
                unknown_keys(&path, child, allowed, out);
            }
        }
    }
}

impl RunConfig {
    /// Parses and validates, reporting every unknown key at once.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Value = toml::from_str(text).map_err(|e| Error::Validation(vec![e.to_string()]))?;
        let mut bad = Vec::new();
        unknown_keys("", &value, &allowed_keys(), &mut bad);
        if !bad.is_empty() {
            return Err(Error::Validation(bad));
        }
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Validation(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg.with_derived_seeds())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut check = |key: &str, r: Result<()>| {
            if let Err(e) = r {
                problems.push(format!("{key}: {e}"));
            }
        };
        check("sft.recipe", self.sft.recipe.validate());
        check("decode", self.decode.validate());
        check("rl", self.rl.validate());
        check("metrics.bleu", self.metrics.bleu.validate());
        check(
            "controls.tagger",
            crate::controlwords::tagger_by_name(&self.controls.tagger)
                .map(|_| ())
                .ok_or_else(|| Error::invalid(format!("unknown tagger {:?}", self.controls.tagger))),
        );
        if self.corpus.window == 0 {
            problems.push("corpus.window: must be at least 1".into());
        }
        if !(self.corpus.train_fraction > 0.0 && self.corpus.train_fraction < 1.0) {
            problems.push("corpus.train_fraction: must be in (0, 1)".into());
        }
        if self.model.d_model % self.model.n_head.max(1) != 0 || self.model.n_head == 0 {
            problems.push("model.n_head: must divide model.d_model".into());
        }
        if self.sft.response_budget >= self.model.max_seq_len {
            problems.push("sft.response_budget: must be below model.max_seq_len".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Replaces the global seed and re-derives every stage seed from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.with_derived_seeds()
    }

    fn with_derived_seeds(mut self) -> Self {
        let s = self.seed;
        self.model.init_seed = derive_seed(s, "model-init");
        self.sft.seed = derive_seed(s, "train-sft");
        self.entailment.seed = derive_seed(s, "train-entailment");
        self.entailment.encoder.init_seed = derive_seed(s, "entailment-init");
        self.decode.seed = derive_seed(s, "decode");
        self.rl.seed = derive_seed(s, "train-rl");
        self.rl.decode.seed = derive_seed(s, "rl-decode");
        self
    }

    pub fn max_context_tokens(&self) -> usize {
        self.corpus.max_context_tokens.unwrap_or_else(|| {
            self.model
                .max_seq_len
                .saturating_sub(self.sft.response_budget + self.corpus.control_reserve)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_defaults() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c, RunConfig::default().with_seed(0));
        assert_eq!((c.rl.total_steps, c.rl.batch_size, c.rl.ppo_epochs, c.rl.minibatches_per_batch), (400, 8, 4, 1));
    }

    #[test]
    fn every_unknown_key_is_listed() {
        let text = "seed = 3\nbogus = 1\n[sft]\nsteps = 5\nlearning_rat = 0.1\n[sft.recipe]\nuse_context = true\ncorruption = 0.5\n[rl]\nseed = 4\n[nope]\nx = 1\n";
        match RunConfig::from_toml_str(text) {
            Err(Error::Validation(v)) => {
                let keys: Vec<&str> = v.iter().map(|m| m.split(':').next().unwrap()).collect();
                assert_eq!(keys, ["bogus", "nope", "rl.seed", "sft.learning_rat"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn optional_keys_accepted() {
        let text = "[rl.adaptive_kl]\ntarget = 6.0\nhorizon = 10000.0\n[sft.recipe]\nuse_context = true\nuse_controls = true\nsampling = [0.5, 1.0]\n";
        let c = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(c.sft.recipe.sampling, Some((0.5, 1.0)));
        assert!(c.rl.adaptive_kl.is_some());
    }

    #[test]
    fn seeds_follow_global_seed() {
        let a = RunConfig::from_toml_str("seed = 1").unwrap();
        let b = RunConfig::from_toml_str("seed = 2").unwrap();
        assert_ne!(a.sft.seed, b.sft.seed);
        assert_eq!(a, RunConfig::default().with_seed(1));
    }

    #[test]
    fn invalid_values_reported() {
        assert!(matches!(
            RunConfig::from_toml_str("[corpus]\ntrain_fraction = 1.5"),
            Err(Error::Validation(_))
        ));
    }
}

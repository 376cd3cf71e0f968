//! PPO on a one-step bandit: the reward is 1 when the generation contains a
//! designated word. Shows the mean held-out reward before and after training
//! and checks that the frozen reference model never changes.
//!
//! Run with `cargo run --release --example ppo_bandit -- [seed]`.

use ctxpara::generator::{assemble_prompt, DecodeConfig, LanguageModel, PromptLimits, SeparatorScheme, TinyConfig, TinyTransformer, Tokenizer};
use ctxpara::metrics::{Evaluator, ScoreBreakdown};
use ctxpara::rl::{mean_reward, train_rl, PromptItem, PromptSource, RlConfig};

pub const TARGET: &str = "refund";

pub struct ContainsTarget;

impl Evaluator for ContainsTarget {
    fn evaluate(&self, id: &str, _: &str, _: &str, generated: &str) -> ctxpara::Result<ScoreBreakdown> {
        let hit = ctxpara::text::simple_tokens(generated).iter().any(|t| t == TARGET);
        let r = if hit { 1.0 } else { 0.0 };
        Ok(ScoreBreakdown::new(id, r, r, r, r))
    }
}

pub struct Fixed(pub Vec<PromptItem>);

impl PromptSource for Fixed {
    fn batch(&mut self, step: usize, size: usize) -> ctxpara::Result<Vec<PromptItem>> {
        Ok((0..size).map(|i| self.0[(step * size + i) % self.0.len()].clone()).collect())
    }
}

pub fn prompts(tok: &Tokenizer, lines: &[&str]) -> Vec<PromptItem> {
    let limits = PromptLimits {
        max_sequence_length: 64,
        response_budget: 16,
    };
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| PromptItem {
            sample_id: format!("p{i}"),
            context: l.to_string(),
            actual: String::new(),
            prompt: assemble_prompt(tok, &[l.to_string()], &[], SeparatorScheme::default(), limits).unwrap(),
        })
        .collect()
}

pub const TRAIN_PROMPTS: [&str; 3] = ["customer: my order is late", "customer: where is my food", "customer: hello"];
pub const HELD_OUT_PROMPTS: [&str; 2] = ["customer: i want my money", "customer: the food was cold"];

/// The untrained policy for a seed.
pub fn policy(seed: u64) -> ctxpara::Result<TinyTransformer> {
    let tok = Tokenizer::build(
        ["customer: my order is late", "customer: i want a refund", "agent: sorry about that"],
        1,
        100,
    );
    let cfg = TinyConfig {
        max_seq_len: 64,
        init_seed: seed,
        ..TinyConfig::default()
    };
    TinyTransformer::new(cfg, tok)
}

pub fn decode() -> DecodeConfig {
    DecodeConfig {
        max_new_tokens: 8,
        top_p: 1.0,
        ..DecodeConfig::default()
    }
}

pub fn rl_config(seed: u64, steps: usize) -> RlConfig {
    RlConfig {
        total_steps: steps,
        batch_size: 16,
        learning_rate: 1e-2,
        kl_beta: 0.0,
        seed,
        decode: decode(),
        ..RlConfig::default()
    }
}

/// Mean held-out reward before and after `steps` PPO steps, and whether the
/// reference model's parameter hash stayed equal to the initial policy's.
pub fn run(seed: u64, steps: usize) -> ctxpara::Result<(f64, f64, bool)> {
    let mut policy = policy(seed)?;
    let tok = policy.tokenizer().clone();
    let train = prompts(&tok, &TRAIN_PROMPTS);
    let held_out = prompts(&tok, &HELD_OUT_PROMPTS);
    let before = mean_reward(&policy, &held_out, &ContainsTarget, &decode(), 200, seed)?;
    let reference_hash = policy.params().hash()?;
    let report = train_rl(&mut policy, &mut Fixed(train), &ContainsTarget, &rl_config(seed, steps))?;
    let after = mean_reward(&policy, &held_out, &ContainsTarget, &decode(), 200, seed)?;
    Ok((before, after, report.reference_hash == reference_hash))
}

#[allow(dead_code)]
fn main() -> ctxpara::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let (before, after, frozen) = run(seed, 50)?;
    println!("seed {seed}: held-out reward {before:.3} -> {after:.3}; reference frozen: {frozen}");
    Ok(())
}

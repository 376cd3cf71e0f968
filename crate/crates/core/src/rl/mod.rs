//! Fine-tuning the generator against the composite evaluator with PPO and a
//! KL penalty toward the frozen supervised model.

mod ppo;
mod reward;

pub use ppo::{
    collect_rollouts, mean_reward, ppo_update, train_rl, whiten, PromptItem, PromptSource, RlConfig, RlReport,
    Rollout, RolloutBatch, SamplePromptSource, StepStats, UpdateStats, ValueHead,
};
pub use reward::{kl_penalized_reward, AdaptiveKl};

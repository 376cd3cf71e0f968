//! Supervised fine-tuning of the tiny generator on a handful of samples until
//! it reproduces their responses under greedy decoding.
//!
//! Run with `cargo run --release --example sft_overfit`.

use std::path::Path;

use ctxpara::controlwords::{extract_control_words, LexRulesTagger};
use ctxpara::corpus::{build_samples, ingest_transcripts};
use ctxpara::generator::{
    generate, prompt_for_sample, sft_train, DecodeConfig, LanguageModel, PromptLimits, PromptRecipe, TinyConfig,
    TinyTransformer, Tokenizer, TrainConfig,
};
use ctxpara::seed::rng_from_seed;

fn main() -> ctxpara::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/transcripts.jsonl");
    let (corpus, _) = ingest_transcripts(std::io::BufReader::new(std::fs::File::open(path)?))?;
    let lines: Vec<String> = corpus
        .conversations()
        .iter()
        .flat_map(|c| c.turns.iter().map(|t| t.prefixed()))
        .collect();
    let tokenizer = Tokenizer::build(lines.iter().map(String::as_str), 1, 4000);
    let mut samples: Vec<_> = build_samples(&corpus, 6, 64, &tokenizer).into_iter().take(4).collect();
    for s in &mut samples {
        s.control_words = extract_control_words(&s.response, &s.id, &LexRulesTagger)?.words;
    }

    let model_cfg = TinyConfig {
        max_seq_len: 160,
        ..TinyConfig::default()
    };
    let mut model = TinyTransformer::new(model_cfg, tokenizer)?;
    let cfg = TrainConfig {
        steps: 150,
        batch_size: 4,
        learning_rate: 1e-2,
        eval_interval: 25,
        response_budget: 32,
        recipe: PromptRecipe::default(),
        ..TrainConfig::default()
    };
    let report = sft_train(&mut model, &samples, &samples, &[], &cfg)?;
    for p in report.curve.iter().filter(|p| p.val_loss.is_some()) {
        println!("step {:>3}: train {:.3} val {:.3}", p.step, p.train_loss, p.val_loss.unwrap_or(f64::NAN));
    }

    let limits = PromptLimits {
        max_sequence_length: model.max_sequence_length(),
        response_budget: cfg.response_budget,
    };
    let mut rng = rng_from_seed(0);
    for s in &samples {
        let prompt = prompt_for_sample(model.tokenizer(), s, &cfg.recipe, &[], limits, &mut rng)?;
        let g = generate(&model, &prompt, &DecodeConfig::greedy(32), &mut rng)?;
        println!("\nactual:    {}\ngenerated: {}", s.response, g.text);
    }
    Ok(())
}

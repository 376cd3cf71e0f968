//! Builds a tokenizer and samples from the fixture transcripts, lays out the
//! prompt for each approach's recipe, and decodes from an untrained model with
//! greedy and nucleus sampling.
//!
//! Run with `cargo run --example prompt_and_generate`.

use std::path::Path;

use ctxpara::controlwords::{extract_control_words, LexRulesTagger};
use ctxpara::corpus::{build_samples, ingest_transcripts};
use ctxpara::evalharness::ApproachName;
use ctxpara::generator::{
    generate, prompt_for_sample, DecodeConfig, LanguageModel, PromptLimits, TinyConfig, TinyTransformer, Tokenizer,
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
    println!("tokenizer {} with {} ids", tokenizer.id(), tokenizer.vocab_size());

    let mut samples = build_samples(&corpus, 6, 96, &tokenizer);
    let mut sample = samples.swap_remove(3);
    sample.control_words = extract_control_words(&sample.response, &sample.id, &LexRulesTagger)?.words;
    println!("sample {}: response {:?}\n", sample.id, sample.response);

    let vocab: Vec<String> = ["coupon", "wallet", "refund", "bag"].map(String::from).to_vec();
    let limits = PromptLimits {
        max_sequence_length: 256,
        response_budget: 64,
    };
    let mut rng = rng_from_seed(1);
    for approach in [
        ApproachName::OnlyContext,
        ApproachName::OnlyControlWords,
        ApproachName::ContextControlNoise,
        ApproachName::ContextControlSampling,
    ] {
        let p = prompt_for_sample(&tokenizer, &sample, &approach.default_recipe(), &vocab, limits, &mut rng)?;
        println!("{approach} ({} tokens):\n{}\n", p.token_ids.len(), tokenizer.decode(&p.token_ids));
    }

    let model = TinyTransformer::new(TinyConfig::default(), tokenizer)?;
    let recipe = ApproachName::ContextAndControl.default_recipe();
    let prompt = prompt_for_sample(model.tokenizer(), &sample, &recipe, &vocab, limits, &mut rng)?;
    let greedy = generate(&model, &prompt, &DecodeConfig::greedy(12), &mut rng)?;
    println!("greedy (untrained): {:?} logprob {:.2}", greedy.text, greedy.logprob());
    let nucleus = DecodeConfig::default().parse_overrides("top_p=0.9,temperature=0.8,max_new_tokens=12")?;
    for _ in 0..3 {
        let g = generate(&model, &prompt, &nucleus, &mut rng)?;
        println!("top-p (untrained):  {:?} logprob {:.2}", g.text, g.logprob());
    }
    Ok(())
}

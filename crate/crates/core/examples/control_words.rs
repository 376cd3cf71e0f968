//! Control-word extraction with the pinned rule-based tagger, then the two
//! prompt-time perturbations: rate subsampling and vocabulary corruption.
//!
//! Run with `cargo run --example control_words`.

use ctxpara::controlwords::{
    corrupt_control_words, extract_control_words, order_for_prompt, sample_control_words, LexRulesTagger, PosTagger,
};
use ctxpara::seed::rng_from_seed;

const RESPONSES: [&str; 4] = [
    "I reqeust you to please wait for the same on this and the order will be confirmed shortly by the restaurant.",
    "The food will be delivered as promised, our partner is on it the earleist.",
    "Upendra, I will definitely help you.",
    "I just have a word with the restaurant and they are closed for today so shall I proceed for the cancelation?",
];

fn main() -> ctxpara::Result<()> {
    let tagger = LexRulesTagger;
    println!("tagger {}\n", tagger.id());
    let mut sets = Vec::new();
    for (i, r) in RESPONSES.iter().enumerate() {
        let trace: Vec<String> = tagger.tag(r)?.iter().map(|t| format!("{}/{}", t.word, t.tag)).collect();
        let set = extract_control_words(r, &format!("r{i}"), &tagger)?;
        println!("{r}\n  tags:     {}\n  controls: {:?}\n", trace.join(" "), set.words);
        sets.push(set);
    }

    let mut rng = rng_from_seed(7);
    let set = &sets[3];
    for rate in [1.0, 0.75, 0.5] {
        println!("rate {rate:.2}: {:?}", sample_control_words(set, rate, &mut rng)?.words);
    }
    let vocab: Vec<String> = ["coupon", "wallet", "partner", "refund", "bag", "address"].map(String::from).to_vec();
    println!("50% corrupted: {:?}", corrupt_control_words(set, &vocab, 0.5, &mut rng)?.words);
    println!("prompt order:  {:?}", order_for_prompt(set, &mut rng));
    Ok(())
}

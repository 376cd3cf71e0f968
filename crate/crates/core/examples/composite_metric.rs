//! The four-part paraphrase score: semantic similarity, textual entailment,
//! expression diversity (inverse BLEU) and fluency, averaged into one number.
//!
//! Run with `cargo run --release --example composite_metric`.

use std::path::Path;

use ctxpara::corpus::{build_entailment_pairs, ingest_transcripts};
use ctxpara::entailment::{train_entailment, EntailmentTrainConfig};
use ctxpara::fluency::{load_cola_tsv, train_fluency, Domain, FluencyConfig};
use ctxpara::metrics::{
    bleu, inverse_bleu, semantic_similarity, BleuConfig, CompositeEvaluator, Evaluator, HashTokenEmbedder,
};

fn main() -> ctxpara::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let (corpus, _) = ingest_transcripts(std::io::BufReader::new(std::fs::File::open(dir.join("transcripts.jsonl"))?))?;
    let (encoder, _) = train_entailment(&build_entailment_pairs(&corpus), &EntailmentTrainConfig::default())?;
    let fluency = train_fluency(&load_cola_tsv(&dir.join("cola_train.tsv"), Domain::InDomain)?, &FluencyConfig::default())?;
    let embedder = HashTokenEmbedder::default();
    let bleu_cfg = BleuConfig::default();
    let evaluator = CompositeEvaluator {
        embedder: &embedder,
        entailment: &encoder,
        fluency: &fluency,
        bleu: bleu_cfg.clone(),
    };

    let context = "customer: hi\nagent: Hello Meera, thank you for reaching out.\ncustomer: my food has not arrived yet";
    let actual = "I am sorry for the delay, let me check the status of your order.";
    let candidates = [
        actual,
        "Sorry for the delay, I will check the status of your order now.",
        "Apologies for the wait, the partner will reach you in ten minutes.",
        "I have added a coupon to your account as an apology.",
        "order the of status check delay.",
        "",
    ];
    println!("actual: {actual}\n");
    println!("{:>6} {:>6} {:>6} {:>6} {:>6} {:>6}  candidate", "sem", "ent", "div", "flu", "score", "bleu");
    for c in candidates {
        let s = evaluator.evaluate("demo", context, actual, c)?;
        let b = if c.is_empty() { 0.0 } else { bleu(c, actual, &bleu_cfg)? };
        println!(
            "{:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>6.3} {:>6.3}  {c:?}{}",
            s.semantic_similarity,
            s.textual_entailment,
            s.expression_diversity,
            s.fluency,
            s.composite,
            b,
            if s.degenerate { " (degenerate)" } else { "" }
        );
    }
    println!(
        "\ninverse BLEU of a response against itself: {}",
        inverse_bleu(actual, actual, &bleu_cfg)?
    );
    println!(
        "semantic similarity of a response with itself: {:.3}",
        semantic_similarity(&embedder, actual, actual)?
    );
    Ok(())
}

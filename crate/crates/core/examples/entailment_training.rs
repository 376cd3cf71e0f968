//! Trains the hashed bi-encoder on (context, response) pairs from the fixture
//! transcripts with in-batch negatives, then compares next-utterance
//! classification against the untrained encoder on held-out conversations.
//!
//! Run with `cargo run --release --example entailment_training`.

use std::collections::HashSet;
use std::path::Path;

use ctxpara::corpus::{build_entailment_pairs, ingest_transcripts, split_conversation_ids};
use ctxpara::entailment::{
    build_nuc_cases, entailment_score, evaluate_nuc, train_entailment, EntailmentTrainConfig, HashEncoder,
};

fn main() -> ctxpara::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/transcripts.jsonl");
    let (corpus, _) = ingest_transcripts(std::io::BufReader::new(std::fs::File::open(path)?))?;
    let ids: Vec<String> = corpus.conversations().iter().map(|c| c.id.clone()).collect();
    let (train_ids, test_ids) = split_conversation_ids(&ids, 0.7, 3)?;
    let train = build_entailment_pairs(&corpus.subset(&train_ids.into_iter().collect::<HashSet<_>>()));
    let test = build_entailment_pairs(&corpus.subset(&test_ids.into_iter().collect::<HashSet<_>>()));
    println!("{} training pairs, {} test pairs", train.len(), test.len());

    let cfg = EntailmentTrainConfig {
        steps: 200,
        batch_size: 16,
        ..EntailmentTrainConfig::default()
    };
    let cases = build_nuc_cases(&test, 11)?;
    let untrained = HashEncoder::new(cfg.encoder.clone())?;
    let (trained, report) = train_entailment(&train, &cfg)?;
    println!(
        "loss {:.3} -> {:.3}",
        report.losses.first().copied().unwrap_or(f64::NAN),
        report.losses.last().copied().unwrap_or(f64::NAN)
    );
    for (name, enc) in [("untrained", &untrained), ("trained", &trained)] {
        let m = evaluate_nuc(enc, &cases)?;
        println!("{name:>9}: R@1 {:.3}  R@2 {:.3}  MRR {:.3}  over {} cases", m.r_at_1, m.r_at_2, m.mrr, m.cases);
    }

    let context = "customer: hi\nagent: Hi Priya, I am here to help you.\ncustomer: when will I get my refund";
    for response in [
        "The refund will reach your account within five working days.",
        "I will share the new address with the delivery partner.",
    ] {
        println!("{:.3}  {response}", entailment_score(&trained, context, response)?);
    }
    Ok(())
}

//! Trains the acceptability classifier on CoLA-format data and reports MCC on
//! in-domain and out-of-domain development sets.
//!
//! Run with `cargo run --example fluency_classifier`.

use std::path::Path;

use ctxpara::fluency::{evaluate_fluency, load_cola_tsv, train_fluency, Domain, FluencyConfig, FluencyScorer};

fn main() -> ctxpara::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let train = load_cola_tsv(&dir.join("cola_train.tsv"), Domain::InDomain)?;
    let clf = train_fluency(&train, &FluencyConfig::default())?;
    for (name, file, domain) in [
        ("in-domain dev", "cola_dev.tsv", Domain::InDomain),
        ("out-of-domain dev", "cola_dev_ood.tsv", Domain::OutOfDomain),
    ] {
        let e = evaluate_fluency(&clf, &load_cola_tsv(&dir.join(file), domain)?)?;
        println!("{name:>17}: MCC {:.3}  accuracy {:.3}  {:?}", e.mcc, e.accuracy, e.confusion);
    }
    for s in [
        "The partner reached on time.",
        "Reached the on partner time.",
        "The refund will be refunded today.",
        "Refund the will today be.",
    ] {
        println!("{:.3}  {s}", clf.fluency(s)?);
    }
    Ok(())
}

//! Two-sample t-tests on composite scores, the human rating table with
//! mean ± standard deviation per dimension, and automatic-versus-human
//! rank agreement.
//!
//! Run with `cargo run --example significance_and_human_eval`.

use std::path::Path;

use ctxpara::evalharness::{human_report, ingest_human_labels, pearson, spearman, t_test, t_test_summary};
use ctxpara::seed::rng_from_seed;
use rand_distr::{Distribution, Normal};

fn main() -> ctxpara::Result<()> {
    let t = t_test_summary(0.753, 0.095, 5000, 0.744, 0.073, 5000)?;
    println!("summary statistics: t({}) = {:.3}, p = {:.2e}", t.df, t.t, t.p);

    let mut rng = rng_from_seed(5);
    let a: Vec<f64> = Normal::new(0.70, 0.1).unwrap().sample_iter(&mut rng).take(200).collect();
    let b: Vec<f64> = Normal::new(0.68, 0.1).unwrap().sample_iter(&mut rng).take(200).collect();
    let t = t_test(&a, &b)?;
    println!("raw scores:         t({}) = {:.3}, p = {:.3}\n", t.df, t.t, t.p);

    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/human_labels.csv");
    let records = ingest_human_labels(std::fs::File::open(path)?)?;
    println!("{:<26} {:>11} {:>11} {:>11} {:>11} {:>11}", "approach", "semantic", "entailment", "diversity", "fluency", "overall");
    for row in human_report(&records) {
        let cells = [
            row.semantic_similarity,
            row.textual_entailment,
            row.expression_diversity,
            row.fluency,
            row.overall,
        ]
        .map(|m| format!("{:.2} ± {:.2}", m.mean, m.std));
        println!("{:<26} {:>11} {:>11} {:>11} {:>11} {:>11}", row.approach, cells[0], cells[1], cells[2], cells[3], cells[4]);
    }

    let auto = [0.61, 0.72, 0.55, 0.80, 0.66, 0.74];
    let human = [3.5, 4.0, 3.0, 4.5, 3.5, 4.5];
    println!(
        "\nagreement on six samples: pearson {:.3}, spearman {:.3}",
        pearson(&auto, &human).unwrap_or(f64::NAN),
        spearman(&auto, &human).unwrap_or(f64::NAN)
    );
    Ok(())
}

//! Runs every pipeline stage through the command line interface on the bundled
//! fixtures: ingest, sample building, control words, one fine-tuned generator
//! per approach, the two scorer models, generation, scoring, PPO, the approach
//! grid and the final report.
//!
//! Run with `cargo run --release --example toy_pipeline -- [out_dir]`.

use std::path::{Path, PathBuf};

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

const SFT_APPROACHES: [&str; 5] = [
    "only_context",
    "only_control_words",
    "context_and_control",
    "context_control_noise",
    "context_control_sampling",
];

fn stage(name: &str, args: &[String]) -> Result<(), String> {
    let mut argv = vec!["ctxpara".to_string(), name.to_string()];
    argv.extend(args.iter().cloned());
    match ctxpara::cli::run(argv) {
        0 => Ok(()),
        code => Err(format!("stage {name} exited with {code}")),
    }
}

fn s(p: impl AsRef<Path>) -> String {
    p.as_ref().display().to_string()
}

/// Runs the whole pipeline into `out`, which is created if needed.
pub fn run(out: &Path, seed: u64) -> Result<(), String> {
    let fx = fixtures_dir();
    std::fs::create_dir_all(out).map_err(|e| e.to_string())?;
    let common = |mut v: Vec<String>| {
        v.extend(["--config".into(), s(fx.join("toy_config.toml")), "--seed".into(), seed.to_string()]);
        v
    };
    let data = out.join("data");
    let ckpt = out.join("ckpt");
    let corpus = s(out.join("corpus.jsonl"));
    let train = s(data.join("train_cw.jsonl"));
    let val = s(data.join("val_cw.jsonl"));
    let vocab = s(data.join("vocab.txt"));

    stage("ingest", &common(vec!["--in".into(), s(fx.join("transcripts.jsonl")), "--out".into(), corpus.clone()]))?;
    stage("build-samples", &common(vec!["--corpus".into(), corpus, "--out".into(), s(&data)]))?;
    stage(
        "extract-controls",
        &common(vec![
            "--samples".into(),
            s(data.join("train.jsonl")),
            "--out".into(),
            train.clone(),
            "--write-vocab".into(),
            vocab.clone(),
        ]),
    )?;
    stage(
        "extract-controls",
        &common(vec!["--samples".into(), s(data.join("val.jsonl")), "--out".into(), val.clone()]),
    )?;

    let sft = |approach: &str, steps: Option<usize>, dir: &str| {
        let mut v = vec![
            "--samples".into(),
            train.clone(),
            "--val".into(),
            val.clone(),
            "--vocab".into(),
            vocab.clone(),
            "--approach".into(),
            approach.into(),
            "--out".into(),
            s(ckpt.join(dir)),
        ];
        if let Some(n) = steps {
            v.extend(["--steps".into(), n.to_string()]);
        }
        stage("train-sft", &common(v))
    };
    sft("pretrained", Some(0), "pretrained")?;
    for a in SFT_APPROACHES {
        sft(a, None, a)?;
    }

    let ent = s(ckpt.join("entailment"));
    let flu = s(ckpt.join("fluency"));
    stage(
        "train-entailment",
        &common(vec!["--pairs".into(), s(data.join("entailment_pairs.jsonl")), "--out".into(), ent.clone()]),
    )?;
    stage(
        "eval-nuc",
        &common(vec![
            "--ckpt".into(),
            ent.clone(),
            "--cases".into(),
            s(data.join("nuc_cases.jsonl")),
            "--out".into(),
            s(out.join("nuc.json")),
        ]),
    )?;
    stage(
        "train-fluency",
        &common(vec![
            "--train".into(),
            s(fx.join("cola_train.tsv")),
            "--dev".into(),
            s(fx.join("cola_dev.tsv")),
            "--dev-out-of-domain".into(),
            s(fx.join("cola_dev_ood.tsv")),
            "--out".into(),
            flu.clone(),
        ]),
    )?;
    stage(
        "eval-fluency",
        &common(vec![
            "--ckpt".into(),
            flu.clone(),
            "--test".into(),
            s(fx.join("cola_dev.tsv")),
            "--out".into(),
            s(out.join("fluency_eval.json")),
        ]),
    )?;

    let best_sft = s(ckpt.join("context_control_sampling"));
    let gens = s(out.join("sft_generations.jsonl"));
    stage(
        "generate",
        &common(vec![
            "--ckpt".into(),
            best_sft.clone(),
            "--samples".into(),
            val.clone(),
            "--vocab".into(),
            vocab.clone(),
            "--out".into(),
            gens.clone(),
        ]),
    )?;
    stage(
        "score",
        &common(vec![
            "--generations".into(),
            gens,
            "--samples".into(),
            val.clone(),
            "--entailment-ckpt".into(),
            ent.clone(),
            "--fluency-ckpt".into(),
            flu.clone(),
            "--out".into(),
            s(out.join("sft_scores.jsonl")),
        ]),
    )?;
    stage(
        "train-rl",
        &common(vec![
            "--sft-ckpt".into(),
            best_sft,
            "--samples".into(),
            train.clone(),
            "--vocab".into(),
            vocab,
            "--entailment-ckpt".into(),
            ent,
            "--fluency-ckpt".into(),
            flu,
            "--out".into(),
            s(ckpt.join("rl_finetuned")),
        ]),
    )?;

    let grid = out.join("grid.toml");
    std::fs::copy(fx.join("toy_grid.toml"), &grid).map_err(|e| e.to_string())?;
    let eval = out.join("eval");
    stage("evaluate", &common(vec!["--grid".into(), s(&grid), "--out".into(), s(&eval)]))?;
    stage(
        "report",
        &common(vec![
            "--scores".into(),
            s(&eval),
            "--human".into(),
            s(fx.join("human_labels.csv")),
            "--out".into(),
            s(out.join("report.json")),
        ]),
    )
}

#[allow(dead_code)]
fn main() {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../target/toy-run"));
    if let Err(e) = run(&out, 7) {
        eprintln!("{e}");
        std::process::exit(1);
    }
    let report = std::fs::read_to_string(out.join("report.md")).unwrap_or_default();
    println!("{report}");
    println!("outputs in {}", out.display());
}

//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

#[path = "../examples/ppo_bandit.rs"]
mod ppo_bandit;

#[path = "../examples/toy_pipeline.rs"]
mod toy_pipeline;

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use ctxpara::controlwords::{extract_control_words, LexRulesTagger, PosTagger};
use ctxpara::corpus::{build_samples, context_token_count, ingest_transcripts};
use ctxpara::entailment::{evaluate_nuc, mnr_loss, mnr_loss_and_grad, NucEvalCase, PairScorer};
use ctxpara::evalharness::t_test_summary;
use ctxpara::fluency::{mcc, Confusion};
use ctxpara::generator::Tokenizer;
use ctxpara::metrics::{bleu, composite_mean, inverse_bleu, BleuConfig};
use ctxpara::rl::kl_penalized_reward;
use ctxpara::seed::{derive_seed, rng_from_seed};
use rand::Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn composite_table() -> Check {
    let rows: [(&str, [f64; 4], f64); 7] = [
        ("Pre-trained", [0.268, 0.559, 0.954, 0.859], 0.660),
        ("Only Context", [0.632, 0.695, 0.762, 0.886], 0.744),
        ("Only Control words", [0.821, 0.748, 0.362, 0.825], 0.689),
        ("Context and Control words", [0.812, 0.752, 0.390, 0.829], 0.696),
        ("Context and Control words with Noise", [0.687, 0.695, 0.589, 0.729], 0.675),
        ("Context and Control words with Sampling", [0.732, 0.731, 0.560, 0.867], 0.722),
        ("RL based Finetuning", [0.671, 0.726, 0.742, 0.873], 0.753),
    ];
    let mut worst: f64 = 0.0;
    for (name, [a, b, c, d], overall) in rows {
        let got = composite_mean(a, b, c, d);
        worst = worst.max((got - overall).abs());
        // Published values are rounded to three decimals; a true mean of x.xxx5 sits
        // exactly on the tolerance, so allow for binary representation error.
        ensure((got - overall).abs() <= 0.0005 + 1e-12, format!("{name}: {got:.4} vs {overall}"))?;
    }
    Ok(format!("7/7 rows, max deviation {worst:.5}"))
}

fn bleu_identities() -> Check {
    let cfg = BleuConfig::default();
    let pairs = common::response_pairs();
    let mut worst: f64 = 0.0;
    for (c, r) in &pairs {
        ensure(inverse_bleu(r, r, &cfg).map_err(|e| e.to_string())? == 0.0, format!("inverse_bleu(x,x) != 0 for {r:?}"))?;
        let b = bleu(c, r, &cfg).map_err(|e| e.to_string())?;
        let ib = inverse_bleu(c, r, &cfg).map_err(|e| e.to_string())?;
        ensure(ib + b == 1.0, format!("bleu + inverse != 1 for {c:?}"))?;
        let o = common::oracle_bleu(c, r, cfg.max_ngram_order, cfg.smoothing, cfg.epsilon);
        worst = worst.max((b - o).abs());
        ensure((b - o).abs() < 1e-6, format!("oracle mismatch on {c:?} / {r:?}: {b} vs {o}"))?;
    }
    Ok(format!("{} pairs, max oracle deviation {worst:.2e}", pairs.len()))
}

fn mnr_closed_forms() -> Check {
    for b in [2usize, 4, 8] {
        let same = vec![vec![0.6, 0.8]; b];
        let l = mnr_loss(&same, &same, 20.0).map_err(|e| e.to_string())?;
        ensure((l - (b as f64).ln()).abs() < 1e-9, format!("B={b}: {l} vs ln B"))?;
    }
    let e = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let l = mnr_loss(&e, &e, 1.0).map_err(|e| e.to_string())?;
    let want = -(std::f64::consts::E / (std::f64::consts::E + 1.0)).ln();
    ensure((l - want).abs() < 1e-6, format!("orthogonal B=2: {l}"))?;
    let mut rng = rng_from_seed(31);
    let mut worst: f64 = 0.0;
    for inst in 0..20 {
        let (b, d) = (2 + inst % 3, 3 + inst % 2);
        let mut rand_rows = |n: usize| -> Vec<Vec<f64>> { (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect() };
        let c = rand_rows(b);
        let r = rand_rows(b);
        let out = mnr_loss_and_grad(&c, &r, 10.0).map_err(|e| e.to_string())?;
        for i in 0..b {
            for k in 0..d {
                let h = 1e-6;
                let (mut cp, mut cm) = (c.clone(), c.clone());
                cp[i][k] += h;
                cm[i][k] -= h;
                let num = (mnr_loss(&cp, &r, 10.0).unwrap() - mnr_loss(&cm, &r, 10.0).unwrap()) / (2.0 * h);
                let ana = out.grad_context[i][k];
                let rel = (ana - num).abs() / ana.abs().max(num.abs()).max(1e-6);
                if (ana - num).abs() > 1e-8 {
                    worst = worst.max(rel);
                }
                ensure(rel <= 1e-4 || (ana - num).abs() <= 1e-8, format!("instance {inst} [{i}][{k}]: {ana} vs {num}"))?;
            }
        }
    }
    Ok(format!("ln B for B in {{2,4,8}}, orthogonal case {l:.6}, 20 gradient checks (max rel err {worst:.1e})"))
}

struct RandomScorer;

impl PairScorer for RandomScorer {
    fn score_pair(&self, c: &str, r: &str) -> ctxpara::Result<f64> {
        Ok(derive_seed(123, &format!("{c}|{r}")) as f64 / u64::MAX as f64)
    }
}

struct OracleScorer;

impl PairScorer for OracleScorer {
    fn score_pair(&self, c: &str, r: &str) -> ctxpara::Result<f64> {
        Ok((c.trim_start_matches("ctx ") == r.trim_start_matches("rsp ")) as u8 as f64)
    }
}

fn nuc_baselines() -> Check {
    let cases: Vec<NucEvalCase> = (0..5000)
        .map(|i| NucEvalCase {
            context: format!("ctx {i}"),
            response: format!("rsp {i}"),
            distractors: (0..9).map(|j| format!("rsp {i}-{j}")).collect(),
        })
        .collect();
    let m = evaluate_nuc(&RandomScorer, &cases).map_err(|e| e.to_string())?;
    let h10: f64 = (1..=10).map(|k| 1.0 / k as f64).sum();
    ensure((m.r_at_1 - 0.1).abs() <= 0.02, format!("random R@1 {}", m.r_at_1))?;
    ensure((m.mrr - h10 / 10.0).abs() <= 0.02, format!("random MRR {}", m.mrr))?;
    let o = evaluate_nuc(&OracleScorer, &cases).map_err(|e| e.to_string())?;
    ensure(o.r_at_1 == 1.0 && o.r_at_2 == 1.0 && o.mrr == 1.0, format!("oracle {o:?}"))?;
    Ok(format!("random R@1 {:.3} MRR {:.4} (H10/10 = {:.4}); oracle 1/1/1", m.r_at_1, m.mrr, h10 / 10.0))
}

fn mcc_cases() -> Check {
    let labels = [true, false, true, true, false, false, true];
    let inv: Vec<bool> = labels.iter().map(|x| !x).collect();
    let e = |r: ctxpara::Result<f64>| r.map_err(|e| e.to_string());
    ensure(e(mcc(&labels, &labels))? == 1.0, "perfect != 1")?;
    ensure(e(mcc(&inv, &labels))? == -1.0, "inverted != -1")?;
    ensure(e(mcc(&[true; 7], &labels))? == 0.0, "constant != 0")?;
    let c = Confusion {
        tp: 3,
        tn: 2,
        fp: 1,
        fn_: 2,
    };
    ensure((c.mcc() - 4.0 / 240f64.sqrt()).abs() < 1e-9, format!("worked matrix {}", c.mcc()))?;
    Ok(format!("1, -1, 0 and worked matrix {:.6}", c.mcc()))
}

fn kl_reward() -> Check {
    let e = |r: ctxpara::Result<f64>| r.map_err(|e| e.to_string());
    let mut checks = 0;
    for r in [-1.0, 0.0, 0.4, 2.5] {
        for lp in [-30.0, -2.0, -0.1] {
            for beta in [0.0, 0.05, 1.0, 7.0] {
                ensure(e(kl_penalized_reward(r, lp, lp, beta))? == r, "R' != R when policy equals reference")?;
                ensure(e(kl_penalized_reward(r, lp, lp - 0.7, 0.0))? == r, "R' != R when beta is 0")?;
                let a = e(kl_penalized_reward(r, lp, lp - 0.7, beta))?;
                let b = e(kl_penalized_reward(r, lp, lp - 0.7, beta + 0.5))?;
                ensure(b < a, "not strictly decreasing in beta")?;
                checks += 3;
            }
        }
    }
    let v = e(kl_penalized_reward(0.8, -1.0, -1.5, 0.2))?;
    ensure((v - 0.7).abs() < 1e-12, format!("0.8 - 0.2*0.5 gave {v}"))?;
    Ok(format!("{checks} property checks, substitution case {v:.3}"))
}

fn ppo_bandit() -> Check {
    let mut improved = 0;
    let mut detail = Vec::new();
    for seed in 0..10u64 {
        let (before, after, frozen) = ppo_bandit::run(seed, 50).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(frozen, format!("seed {seed}: reference hash changed"))?;
        if after > before {
            improved += 1;
        }
        detail.push(format!("{before:.2}->{after:.2}"));
    }
    ensure(improved >= 9, format!("{improved}/10 seeds improved: {}", detail.join(" ")))?;
    Ok(format!("{improved}/10 seeds improved, reference frozen: {}", detail.join(" ")))
}

fn significance() -> Check {
    let t = t_test_summary(0.753, 0.095, 5000, 0.744, 0.073, 5000).map_err(|e| e.to_string())?;
    ensure((5.26..=5.36).contains(&t.t), format!("t = {}", t.t))?;
    ensure(t.p < 1e-6, format!("p = {}", t.p))?;
    Ok(format!("t({}) = {:.3} (published 5.33), p = {:.2e}", t.df, t.t, t.p))
}

fn control_words_golden() -> Check {
    let rows: [(&str, &[&str]); 4] = [
        (
            "I reqeust you to please wait for the same on this and the order will be confirmed shortly by the restaurant.",
            &["restaurant", "reqeust", "order", "confirmed", "please"],
        ),
        (
            "The food will be delivered as promised, our partner is on it the earleist.",
            &["food", "partner", "earleist", "delivered"],
        ),
        ("Upendra, I will definitely help you.", &["help", "Upendra"]),
        (
            "I just have a word with the restaurant and they are closed for today so shall I proceed for the cancelation?",
            &["proceed", "closed", "restaurant", "cancelation", "today", "word"],
        ),
    ];
    let tagger = LexRulesTagger;
    let mut exact = 0;
    let mut divergent = Vec::new();
    for (i, (resp, want)) in rows.iter().enumerate() {
        let got = extract_control_words(resp, &format!("row{}", i + 1), &tagger).map_err(|e| e.to_string())?;
        let got_set: BTreeSet<&str> = got.as_set();
        let want_set: BTreeSet<&str> = want.iter().copied().collect();
        if got_set == want_set {
            exact += 1;
        } else {
            let trace: Vec<String> = tagger
                .tag(resp)
                .map_err(|e| e.to_string())?
                .iter()
                .map(|t| format!("{}/{}", t.word, t.tag))
                .collect();
            divergent.push(format!(
                "row {}: got {:?}, expected {:?}; tags: {}",
                i + 1,
                got_set,
                want_set,
                trace.join(" ")
            ));
        }
    }
    for d in &divergent {
        println!("    divergent {d}");
    }
    ensure(exact >= 3, format!("{exact}/4 rows exact"))?;
    Ok(format!("{exact}/4 rows exact under {}", tagger.id()))
}

const COMPARED_OUTPUTS: [&str; 5] = ["sft_scores.jsonl", "report.json", "report.csv", "report.md", "eval/report.json"];

fn manifests_present(root: &Path) -> Result<(), String> {
    let dirs = ["data", "ckpt/pretrained", "ckpt/context_control_sampling", "ckpt/entailment", "ckpt/fluency", "ckpt/rl_finetuned", "eval"];
    for d in dirs {
        ensure(root.join(d).join("manifest.json").is_file(), format!("no manifest in {d}"))?;
    }
    for f in ["corpus.jsonl", "sft_generations.jsonl", "sft_scores.jsonl", "report.json", "nuc.json"] {
        ensure(root.join(format!("{f}.manifest.json")).is_file(), format!("no manifest for {f}"))?;
    }
    Ok(())
}

fn pipeline_reproducible() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = tmp.path().join("run-a");
    let b = tmp.path().join("run-b");
    toy_pipeline::run(&a, 7)?;
    toy_pipeline::run(&b, 7)?;
    manifests_present(&a)?;
    let mut files: Vec<String> = COMPARED_OUTPUTS.iter().map(|s| s.to_string()).collect();
    for entry in std::fs::read_dir(a.join("eval")).map_err(|e| e.to_string())? {
        let entry = entry.map_err(|e| e.to_string())?;
        if entry.path().is_dir() {
            let name = entry.file_name().to_string_lossy().to_string();
            files.push(format!("eval/{name}/scores.jsonl"));
            files.push(format!("eval/{name}/generations.jsonl"));
        }
    }
    ensure(files.len() == COMPARED_OUTPUTS.len() + 14, format!("expected 7 approaches, compared {files:?}"))?;
    for f in &files {
        let x = std::fs::read(a.join(f)).map_err(|e| format!("{f}: {e}"))?;
        let y = std::fs::read(b.join(f)).map_err(|e| format!("{f}: {e}"))?;
        ensure(!x.is_empty(), format!("{f} is empty"))?;
        ensure(x == y, format!("{f} differs between runs"))?;
    }
    Ok(format!("13 stages ran twice, {} score/report files byte-identical", files.len()))
}

fn sample_contract() -> Check {
    let text = std::fs::read_to_string(common::fixtures().join("transcripts.jsonl")).map_err(|e| e.to_string())?;
    let (corpus, _) = ingest_transcripts(text.as_bytes()).map_err(|e| e.to_string())?;
    let lines: Vec<String> = corpus
        .conversations()
        .iter()
        .flat_map(|c| c.turns.iter().map(|t| t.prefixed()))
        .collect();
    let tok = Tokenizer::build(lines.iter().map(String::as_str), 1, 4000);
    let long: Vec<_> = corpus.conversations().iter().filter(|c| c.turns.len() == 10).collect();
    ensure(!long.is_empty(), "no 10-turn fixture conversation")?;
    let samples = build_samples(&corpus, 6, 64, &tok);
    let mut checked = 0;
    let mut truncated = 0;
    for conv in &long {
        for s in samples.iter().filter(|s| s.conversation_id == conv.id) {
            ensure(s.context.len() <= 6, format!("{}: {} turns", s.id, s.context.len()))?;
            let n = context_token_count(&s.context, &tok);
            ensure(n <= 64, format!("{}: {n} tokens", s.id))?;
            ensure(conv.turns[s.response_index].text == s.response, format!("{}: wrong response", s.id))?;
            let last = s.context.last().ok_or("empty context")?;
            ensure(last.index + 1 == s.response_index, format!("{}: context does not end right before the response", s.id))?;
            for (k, t) in s.context.iter().rev().enumerate() {
                let src = &conv.turns[s.response_index - 1 - k];
                ensure(src.text.ends_with(&t.text) && t.speaker == src.speaker, format!("{}: context turn {k} differs", s.id))?;
            }
            let window = s.response_index.min(6);
            if s.context.len() < window || context_token_count(&conv.turns[s.response_index - window..s.response_index], &tok) > 64 {
                truncated += 1;
            }
            checked += 1;
        }
    }
    ensure(truncated > 0, "the 64-token cap never binds on these conversations")?;
    Ok(format!("{checked} samples from {} ten-turn conversations, {truncated} truncated by the cap", long.len()))
}

fn main() {
    if std::env::var_os("RUST_LOG").is_none() {
        std::env::set_var("RUST_LOG", "warn");
    }
    let criteria: [(&str, fn() -> Check); 11] = [
        ("AC1 composite arithmetic", composite_table),
        ("AC2 inverse BLEU identities and oracle", bleu_identities),
        ("AC3 MNR loss closed forms and gradient", mnr_closed_forms),
        ("AC4 NUC random and oracle baselines", nuc_baselines),
        ("AC5 MCC correctness", mcc_cases),
        ("AC6 KL-penalized reward", kl_reward),
        ("AC7 PPO toy convergence", ppo_bandit),
        ("AC8 significance cross-check", significance),
        ("AC9 control-word golden set", control_words_golden),
        ("AC10 end-to-end reproducibility", pipeline_reproducible),
        ("AC11 sample-construction contract", sample_contract),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        let id = name.split(' ').next().unwrap_or_default();
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS {name}: {msg} [{secs:.1}s]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name}: {msg} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

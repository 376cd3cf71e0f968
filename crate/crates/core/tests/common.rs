#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use ctxpara::metrics::Smoothing;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Agent responses from the fixture transcripts, in file order.
pub fn fixture_responses() -> Vec<String> {
    let text = std::fs::read_to_string(fixtures().join("transcripts.jsonl")).unwrap();
    let mut out = Vec::new();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for t in v["turns"].as_array().unwrap() {
            if t["speaker"] == "agent" {
                out.push(t["text"].as_str().unwrap().to_string());
            }
        }
    }
    out
}

/// 200 (candidate, reference) pairs with varied overlap: unrelated responses,
/// a dropped word, identical text, a truncated prefix.
pub fn response_pairs() -> Vec<(String, String)> {
    let rs = fixture_responses();
    let n = rs.len();
    (0..200)
        .map(|i| {
            let r = rs[i % n].clone();
            let cand = match i % 4 {
                0 => rs[(i * 7 + 3) % n].clone(),
                1 => {
                    let mut w: Vec<&str> = r.split(' ').collect();
                    if w.len() > 2 {
                        w.remove(i % (w.len() - 1) + 1);
                    }
                    w.join(" ")
                }
                2 => r.clone(),
                _ => {
                    let w: Vec<&str> = r.split(' ').collect();
                    w[..w.len().div_ceil(2)].join(" ")
                }
            };
            (cand, r)
        })
        .collect()
}

/// Independent tokenizer mirroring the metric's lowercase word/punctuation split.
pub fn oracle_tokens(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_alphanumeric() {
            let mut w = String::new();
            while i < chars.len() {
                let d = chars[i];
                let joins = (d == '\'' || d == '\u{2019}') && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
                if d.is_alphanumeric() {
                    w.push(d);
                    i += 1;
                } else if joins && !w.is_empty() {
                    w.push(d);
                    w.push(chars[i + 1]);
                    i += 2;
                } else {
                    break;
                }
            }
            out.push(w);
        } else {
            out.push(c.to_string());
            i += 1;
        }
    }
    out
}

fn grams(tokens: &[String], n: usize) -> HashMap<String, f64> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for i in 0..=tokens.len() - n {
            *m.entry(tokens[i..i + n].join("\u{1}")).or_insert(0.0) += 1.0;
        }
    }
    m
}

/// Product form of the geometric mean over the orders the candidate covers.
pub fn oracle_bleu(cand: &str, reference: &str, order: usize, smoothing: Smoothing, eps: f64) -> f64 {
    let c = oracle_tokens(cand);
    let r = oracle_tokens(reference);
    if c.is_empty() {
        return 0.0;
    }
    let mut precisions = Vec::new();
    for n in 1..=order {
        let cg = grams(&c, n);
        let total: f64 = cg.values().sum();
        if total == 0.0 {
            break;
        }
        let rg = grams(&r, n);
        let hits: f64 = cg.iter().map(|(g, k)| k.min(*rg.get(g).unwrap_or(&0.0))).sum();
        let p = match smoothing {
            Smoothing::None => hits / total,
            Smoothing::Epsilon => hits.max(if hits == 0.0 { eps } else { 0.0 }) / total,
            Smoothing::AddOne if n == 1 => hits / total,
            Smoothing::AddOne => (hits + 1.0) / (total + 1.0),
        };
        precisions.push(p);
    }
    let geo = precisions.iter().product::<f64>().powf(1.0 / precisions.len() as f64);
    let bp = if c.len() > r.len() {
        1.0
    } else {
        (1.0 - r.len() as f64 / c.len() as f64).exp()
    };
    bp * geo
}

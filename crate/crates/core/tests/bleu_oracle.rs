//! Sentence BLEU against an independently written implementation, plus the
//! inverse-BLEU identities, over 200 response pairs from the fixtures.

mod common;

use common::{oracle_bleu, oracle_tokens};
use ctxpara::metrics::{bleu, inverse_bleu, BleuConfig, Smoothing};
use proptest::prelude::*;

#[test]
fn worked_example_matches_oracle() {
    let cfg = BleuConfig::default();
    let got = bleu("the cat sat", "the cat sat down", &cfg).unwrap();
    let want = oracle_bleu("the cat sat", "the cat sat down", 4, Smoothing::Epsilon, 1e-9);
    assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    assert!((want - (-1.0f64 / 3.0).exp()).abs() < 1e-12);
}

#[test]
fn two_hundred_pairs_match_oracle_under_each_smoothing() {
    let pairs = common::response_pairs();
    assert_eq!(pairs.len(), 200);
    for smoothing in [Smoothing::Epsilon, Smoothing::None, Smoothing::AddOne] {
        let cfg = BleuConfig {
            smoothing,
            ..BleuConfig::default()
        };
        for (c, r) in &pairs {
            assert_eq!(cfg.tokenize(c), oracle_tokens(c));
            let got = bleu(c, r, &cfg).unwrap();
            let want = oracle_bleu(c, r, cfg.max_ngram_order, smoothing, cfg.epsilon);
            assert!((got - want).abs() < 1e-6, "{smoothing:?} {c:?} / {r:?}: {got} vs {want}");
        }
    }
}

#[test]
fn inverse_bleu_identities_on_pairs() {
    let cfg = BleuConfig::default();
    for (c, r) in common::response_pairs() {
        assert_eq!(inverse_bleu(&r, &r, &cfg).unwrap(), 0.0);
        let b = bleu(&c, &r, &cfg).unwrap();
        let ib = inverse_bleu(&c, &r, &cfg).unwrap();
        assert_eq!(ib + b, 1.0);
        assert!((0.0..=1.0).contains(&ib));
    }
}

#[test]
fn lower_orders_change_the_score() {
    let cfg1 = BleuConfig {
        max_ngram_order: 1,
        ..BleuConfig::default()
    };
    let c = "sorry the order is late";
    let r = "the order is late sorry";
    assert!((bleu(c, r, &cfg1).unwrap() - 1.0).abs() < 1e-12);
    assert!(bleu(c, r, &BleuConfig::default()).unwrap() < 1.0);
}

proptest! {
    #[test]
    fn inverse_bleu_of_self_is_zero(words in proptest::collection::vec("[a-z]{1,6}", 1..12)) {
        let s = words.join(" ");
        prop_assert_eq!(inverse_bleu(&s, &s, &BleuConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn bleu_in_unit_interval(a in proptest::collection::vec("[a-c]{1,2}", 1..10), b in proptest::collection::vec("[a-c]{1,2}", 1..10)) {
        let v = bleu(&a.join(" "), &b.join(" "), &BleuConfig::default()).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
    }
}

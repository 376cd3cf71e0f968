//! In-batch-negatives loss: closed forms, finite-difference gradients,
//! and training improving retrieval.

use ctxpara::corpus::EntailmentPair;
use ctxpara::entailment::{
    entailment_score, mnr_loss, mnr_loss_and_grad, retrieval_accuracy, train_entailment, EncoderConfig,
    EntailmentTrainConfig, HashEncoder,
};
use ctxpara::seed::rng_from_seed;
use proptest::prelude::*;
use rand::Rng;

fn random_batch(rng: &mut impl Rng, b: usize, d: usize) -> Vec<Vec<f64>> {
    (0..b).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

#[test]
fn uniform_similarity_is_ln_b() {
    for b in [2usize, 4, 8] {
        let same: Vec<Vec<f64>> = vec![vec![1.0, 0.0, 0.0]; b];
        let loss = mnr_loss(&same, &same, 20.0).unwrap();
        assert!((loss - (b as f64).ln()).abs() < 1e-9, "B={b}: {loss}");
    }
}

#[test]
fn orthogonal_pair_with_unit_scale() {
    let e = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let loss = mnr_loss(&e, &e, 1.0).unwrap();
    let want = -(std::f64::consts::E / (std::f64::consts::E + 1.0)).ln();
    assert!((loss - want).abs() < 1e-6);
    assert!((loss - 0.3133).abs() < 1e-4);
}

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-4 * a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = rng_from_seed(99);
    for instance in 0..20 {
        let b = 2 + instance % 4;
        let d = 3 + instance % 3;
        let scale = [1.0, 5.0, 20.0][instance % 3];
        let ctx = random_batch(&mut rng, b, d);
        let rsp = random_batch(&mut rng, b, d);
        let out = mnr_loss_and_grad(&ctx, &rsp, scale).unwrap();
        let h = 1e-6;
        for side in 0..2 {
            for i in 0..b {
                for k in 0..d {
                    let (mut plus_c, mut plus_r) = (ctx.clone(), rsp.clone());
                    let (mut minus_c, mut minus_r) = (ctx.clone(), rsp.clone());
                    if side == 0 {
                        plus_c[i][k] += h;
                        minus_c[i][k] -= h;
                    } else {
                        plus_r[i][k] += h;
                        minus_r[i][k] -= h;
                    }
                    let numeric = (mnr_loss(&plus_c, &plus_r, scale).unwrap() - mnr_loss(&minus_c, &minus_r, scale).unwrap())
                        / (2.0 * h);
                    let analytic = if side == 0 { out.grad_context[i][k] } else { out.grad_response[i][k] };
                    assert!(
                        rel_close(analytic, numeric) || (analytic - numeric).abs() < 1e-8,
                        "instance {instance} side {side} [{i}][{k}]: {analytic} vs {numeric}"
                    );
                }
            }
        }
    }
}

#[test]
fn training_improves_in_batch_retrieval() {
    let topics = [
        ("refund", "wallet"),
        ("address", "landmark"),
        ("coupon", "discount"),
        ("delay", "partner"),
        ("cancel", "cancelation"),
        ("missing", "package"),
        ("cold", "quality"),
        ("payment", "deducted"),
    ];
    let mut pairs = Vec::new();
    for round in 0..6 {
        for (i, (a, b)) in topics.iter().enumerate() {
            pairs.push(EntailmentPair {
                context_text: format!("customer: question {round} about {a} token{i}"),
                response_text: format!("agent: answer about {b} tag{i} number {round}"),
            });
        }
    }
    let cfg = EntailmentTrainConfig {
        steps: 150,
        batch_size: 8,
        encoder: EncoderConfig {
            init_seed: 4,
            ..EncoderConfig::default()
        },
        seed: 5,
        ..EntailmentTrainConfig::default()
    };
    let before = retrieval_accuracy(&HashEncoder::new(cfg.encoder.clone()).unwrap(), &pairs[..8]).unwrap();
    let (enc, _) = train_entailment(&pairs, &cfg).unwrap();
    let after = retrieval_accuracy(&enc, &pairs[..8]).unwrap();
    assert!(after > before, "{before} -> {after}");
}

proptest! {
    #[test]
    fn loss_is_non_negative(seed in 0u64..1000, b in 2usize..6, d in 2usize..5, scale in 0.5f64..30.0) {
        let mut rng = rng_from_seed(seed);
        let c = random_batch(&mut rng, b, d);
        let r = random_batch(&mut rng, b, d);
        prop_assert!(mnr_loss(&c, &r, scale).unwrap() >= 0.0);
    }

    #[test]
    fn entailment_score_bounded_and_symmetric(a in "[a-z]{1,8}( [a-z]{1,8}){0,5}", b in "[a-z]{1,8}( [a-z]{1,8}){0,5}") {
        let enc = HashEncoder::new(EncoderConfig::default()).unwrap();
        let s = entailment_score(&enc, &a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!((s - entailment_score(&enc, &b, &a).unwrap()).abs() < 1e-12);
    }
}

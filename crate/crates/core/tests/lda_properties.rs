mod common;

use common::*;
use ldat_core::corpus::BagOfSounds;
use ldat_core::lda::{
    e_step_document, e_step_document_traced, elbo, fit_traced, infer_theta, Alpha, LdaConfig,
    LdaModel,
};
use ldat_core::rng::seeded;
use rand::Rng;

fn model(alpha: Alpha, beta: &[Vec<f64>]) -> LdaModel {
    LdaModel {
        num_topics: beta.len(),
        vocab_size: beta[0].len(),
        alpha,
        log_beta: beta
            .iter()
            .map(|row| row.iter().map(|p| p.ln()).collect())
            .collect(),
    }
}

fn bag(id: &str, counts: Vec<u64>) -> BagOfSounds {
    BagOfSounds::from_counts(id, None, counts)
}

fn tight() -> LdaConfig {
    LdaConfig {
        gamma_tol: 1e-12,
        max_e_iters: 1000,
        ..LdaConfig::default()
    }
}

#[test]
fn enumeration_and_quadrature_oracles_agree() {
    let mut rng = seeded(11);
    for _ in 0..20 {
        let beta = vec![random_stochastic_row(&mut rng, 3), random_stochastic_row(&mut rng, 3)];
        let alpha = [rng.random_range(0.1..2.0), rng.random_range(0.1..2.0)];
        let tokens: Vec<usize> = (0..rng.random_range(1..5)).map(|_| rng.random_range(0..3)).collect();
        let exact = log_evidence_enumeration(&alpha, &beta, &tokens);
        let grid = log_evidence_grid_k2(alpha, &beta, &tokens, 10_000);
        assert!((exact - grid).abs() < 1e-6, "{exact} vs {grid}");
    }
}

#[test]
fn elbo_is_below_brute_force_evidence() {
    let mut rng = seeded(3);
    let beta = vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3]];
    let m = model(Alpha::Symmetric(0.5), &beta);
    for counts in [vec![1, 1, 0], vec![0, 2, 0], vec![0, 0, 2], vec![1, 0, 1]] {
        let doc = bag("d", counts.clone());
        let state = e_step_document(&m, &doc, &tight()).unwrap();
        let bound = elbo(&m, &doc, &state).unwrap();
        let exact = log_evidence_enumeration(&[0.5, 0.5], &beta, &tokens_of(&counts));
        assert!(bound <= exact + 1e-6, "{bound} > {exact}");
        // the bound is not vacuous
        assert!(exact - bound < 1.0, "gap {}", exact - bound);
    }
    // asymmetric α, K = 3
    for _ in 0..50 {
        let k = 3;
        let v = 4;
        let beta: Vec<Vec<f64>> = (0..k).map(|_| random_stochastic_row(&mut rng, v)).collect();
        let alpha: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..3.0)).collect();
        let m = model(Alpha::Vector(alpha.clone()), &beta);
        let mut counts = vec![0u64; v];
        for _ in 0..rng.random_range(1..=4) {
            counts[rng.random_range(0..v)] += 1;
        }
        let doc = bag("d", counts.clone());
        let state = e_step_document(&m, &doc, &tight()).unwrap();
        let bound = elbo(&m, &doc, &state).unwrap();
        let exact = log_evidence_enumeration(&alpha, &beta, &tokens_of(&counts));
        assert!(bound <= exact + 1e-6, "{bound} > {exact}");
    }
}

#[test]
fn single_topic_elbo_is_exact() {
    let beta = vec![vec![0.1, 0.2, 0.3, 0.4]];
    let m = model(Alpha::Symmetric(0.8), &beta);
    let counts = vec![1, 0, 2, 1];
    let doc = bag("d", counts.clone());
    let state = e_step_document(&m, &doc, &LdaConfig::default()).unwrap();
    let bound = elbo(&m, &doc, &state).unwrap();
    let exact = log_evidence_enumeration(&[0.8], &beta, &tokens_of(&counts));
    assert!((bound - exact).abs() < 1e-9);
}

#[test]
fn disjoint_support_posterior_matches_quadrature() {
    let beta = vec![vec![0.5, 0.5, 0.0, 0.0], vec![0.0, 0.0, 0.5, 0.5]];
    let m = model(Alpha::Symmetric(0.1), &beta);
    let counts = vec![12, 8, 0, 0];
    let doc = bag("d", counts.clone());
    let theta = infer_theta(&m, &doc, &LdaConfig::default()).unwrap().theta;
    assert!(theta[0] > 0.99 && theta[1] < 0.01, "{theta:?}");

    // exact posterior mean of θ_0 on a 10^4-point grid
    let tokens = tokens_of(&counts);
    let n = 10_000;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        let t = (i as f64 + 0.5) / n as f64;
        let prior = t.powf(0.1 - 1.0) * (1.0 - t).powf(0.1 - 1.0);
        let lik: f64 = tokens
            .iter()
            .map(|&w| t * beta[0][w] + (1.0 - t) * beta[1][w])
            .product();
        num += t * prior * lik;
        den += prior * lik;
    }
    let grid_mean = num / den;
    assert!(grid_mean > 0.99);
    assert!((grid_mean - theta[0]).abs() < 1e-2);
}

#[test]
fn inner_and_outer_iterations_are_monotone_on_random_instances() {
    let mut rng = seeded(1234);
    for case in 0..100 {
        let k = rng.random_range(1..=4);
        let v = rng.random_range(2..=8);
        let beta: Vec<Vec<f64>> = (0..k).map(|_| random_stochastic_row(&mut rng, v)).collect();
        let m = model(Alpha::Symmetric(rng.random_range(0.05..2.0)), &beta);
        let docs: Vec<BagOfSounds> = (0..rng.random_range(2..10))
            .map(|i| {
                let mut c = vec![0u64; v];
                for _ in 0..rng.random_range(1..30) {
                    c[rng.random_range(0..v)] += 1;
                }
                bag(&format!("d{i}"), c)
            })
            .collect();
        for doc in &docs {
            let (_, trace) = e_step_document_traced(&m, doc, &LdaConfig::default()).unwrap();
            for w in trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-10, "case {case}: inner ELBO fell {} -> {}", w[0], w[1]);
            }
        }
        let cfg = LdaConfig {
            seed: case,
            max_em_iters: 30,
            em_tol: 0.0,
            ..LdaConfig::default()
        };
        let (fitted, trace) = fit_traced(&docs, k, &cfg).unwrap();
        fitted.validate().unwrap();
        for w in trace.objective.windows(2) {
            assert!(w[1] >= w[0] - 1e-6, "case {case}: EM objective fell {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn unsmoothed_corpus_elbo_is_monotone() {
    let mut rng = seeded(99);
    for case in 0..20 {
        let v = 6;
        let docs: Vec<BagOfSounds> = (0..12)
            .map(|i| {
                let mut c = vec![0u64; v];
                for _ in 0..rng.random_range(5..40) {
                    c[rng.random_range(0..v)] += 1;
                }
                bag(&format!("d{i}"), c)
            })
            .collect();
        let cfg = LdaConfig {
            smoothing: None,
            em_tol: 0.0,
            max_em_iters: 25,
            seed: case,
            ..LdaConfig::default()
        };
        let (_, trace) = fit_traced(&docs, 3, &cfg).unwrap();
        assert_eq!(trace.corpus_elbo, trace.objective);
        for w in trace.corpus_elbo.windows(2) {
            assert!(w[1] >= w[0] - 1e-6);
        }
    }
}

#[test]
fn topic_permutation_permutes_gamma() {
    let mut rng = seeded(5);
    for _ in 0..20 {
        let beta: Vec<Vec<f64>> = (0..3).map(|_| random_stochastic_row(&mut rng, 5)).collect();
        let alpha = vec![0.3, 1.1, 0.7];
        let perm = [2, 0, 1];
        let m = model(Alpha::Vector(alpha.clone()), &beta);
        let permuted = model(
            Alpha::Vector(perm.iter().map(|&p| alpha[p]).collect()),
            &perm.iter().map(|&p| beta[p].clone()).collect::<Vec<_>>(),
        );
        let doc = bag("d", vec![2, 0, 1, 4, 1]);
        let g = e_step_document(&m, &doc, &tight()).unwrap().gamma;
        let gp = e_step_document(&permuted, &doc, &tight()).unwrap().gamma;
        for (i, &p) in perm.iter().enumerate() {
            assert!((gp[i] - g[p]).abs() < 1e-8, "{gp:?} vs {g:?}");
        }
    }
}

#[test]
fn vocabulary_permutation_leaves_elbo_unchanged() {
    let mut rng = seeded(6);
    for _ in 0..20 {
        let v = 5;
        let beta: Vec<Vec<f64>> = (0..2).map(|_| random_stochastic_row(&mut rng, v)).collect();
        let counts: Vec<u64> = (0..v).map(|_| rng.random_range(0..4)).collect();
        if counts.iter().sum::<u64>() == 0 {
            continue;
        }
        let perm = [3, 1, 4, 0, 2];
        let m = model(Alpha::Symmetric(0.5), &beta);
        let pm = model(
            Alpha::Symmetric(0.5),
            &beta
                .iter()
                .map(|row| perm.iter().map(|&p| row[p]).collect())
                .collect::<Vec<_>>(),
        );
        let doc = bag("d", counts.clone());
        let pdoc = bag("d", perm.iter().map(|&p| counts[p]).collect());
        let a = elbo(&m, &doc, &e_step_document(&m, &doc, &tight()).unwrap()).unwrap();
        let b = elbo(&pm, &pdoc, &e_step_document(&pm, &pdoc, &tight()).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn outputs_are_normalized() {
    let mut rng = seeded(8);
    let beta: Vec<Vec<f64>> = (0..4).map(|_| random_stochastic_row(&mut rng, 7)).collect();
    let m = model(Alpha::Symmetric(0.25), &beta);
    for i in 0..30 {
        let counts: Vec<u64> = (0..7).map(|_| rng.random_range(0..5)).collect();
        if counts.iter().sum::<u64>() == 0 {
            continue;
        }
        let doc = bag(&format!("d{i}"), counts);
        let s = e_step_document(&m, &doc, &LdaConfig::default()).unwrap();
        for row in &s.phi {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(s.gamma.iter().all(|g| *g > 0.0));
        let theta = infer_theta(&m, &doc, &LdaConfig::default()).unwrap().theta;
        assert!((theta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

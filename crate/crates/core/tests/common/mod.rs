//! Independent reference computations used by the integration and
//! acceptance tests. Nothing here calls into the library's numerical code;
//! special functions come from `statrs`.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use ldat_core::domains::DomainAssignment;
use ldat_core::gmm::GmmModel;
use ldat_core::domains::UbicVector;
use ldat_core::lda::LdaModel;
use ldat_core::ldat::{Activation, Example, LdatNetwork, NetworkConfig};
use rand::Rng;
use statrs::function::gamma::ln_gamma;

/// log B(a) = Σ ln Γ(a_k) − ln Γ(Σ a_k)
fn ln_multivariate_beta(a: &[f64]) -> f64 {
    a.iter().map(|&x| ln_gamma(x)).sum::<f64>() - ln_gamma(a.iter().sum())
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Exact log p(w | α, β) for a token sequence: sums over all K^N topic
/// assignments, with θ integrated out in closed form through Dirichlet
/// moments E[Π θ_k^{n_k}] = B(α + n) / B(α).
pub fn log_evidence_enumeration(alpha: &[f64], beta: &[Vec<f64>], tokens: &[usize]) -> f64 {
    let k = alpha.len();
    let n = tokens.len();
    let ln_b_alpha = ln_multivariate_beta(alpha);
    let mut total = f64::NEG_INFINITY;
    let mut z = vec![0usize; n];
    loop {
        let mut counts = vec![0.0; k];
        let mut log_lik = 0.0;
        for (t, &zt) in z.iter().enumerate() {
            counts[zt] += 1.0;
            log_lik += beta[zt][tokens[t]].ln();
        }
        let post: Vec<f64> = alpha.iter().zip(&counts).map(|(a, c)| a + c).collect();
        total = log_add(total, log_lik + ln_multivariate_beta(&post) - ln_b_alpha);

        // odometer increment over z ∈ {0..K}^N
        let mut pos = 0;
        loop {
            if pos == n {
                return total;
            }
            z[pos] += 1;
            if z[pos] < k {
                break;
            }
            z[pos] = 0;
            pos += 1;
        }
    }
}

/// log p(w | α, β) for K = 2 by midpoint quadrature over θ_0 ∈ (0, 1).
///
/// Each half of the interval is mapped through θ = t^{1/α} (measured from
/// the nearer endpoint), which absorbs the Dirichlet density's endpoint
/// singularity so the transformed integrand is bounded.
pub fn log_evidence_grid_k2(alpha: [f64; 2], beta: &[Vec<f64>], tokens: &[usize], points: usize) -> f64 {
    let lik = |theta0: f64| -> f64 {
        tokens
            .iter()
            .map(|&w| theta0 * beta[0][w] + (1.0 - theta0) * beta[1][w])
            .product()
    };
    // ∫_0^{1/2} θ^{a0−1} (1−θ)^{a1−1} f(θ) dθ with θ = t^{1/a0}
    let half = |a_near: f64, a_far: f64, map: &dyn Fn(f64) -> f64| -> f64 {
        let upper = 0.5f64.powf(a_near);
        let h = upper / points as f64;
        let mut acc = 0.0;
        for i in 0..points {
            let t = (i as f64 + 0.5) * h;
            let s = t.powf(1.0 / a_near);
            acc += (1.0 - s).powf(a_far - 1.0) * lik(map(s));
        }
        acc * h / a_near
    };
    let left = half(alpha[0], alpha[1], &|s| s);
    let right = half(alpha[1], alpha[0], &|s| 1.0 - s);
    (left + right).ln() - ln_multivariate_beta(&alpha)
}

/// Token list of a bag, symbols in ascending order.
pub fn tokens_of(counts: &[u64]) -> Vec<usize> {
    counts
        .iter()
        .enumerate()
        .flat_map(|(w, &c)| std::iter::repeat_n(w, c as usize))
        .collect()
}

pub fn probs(model: &LdaModel) -> Vec<Vec<f64>> {
    model
        .log_beta
        .iter()
        .map(|row| row.iter().map(|l| l.exp()).collect())
        .collect()
}

/// P(G_i | x) from the plain density ratio, without logs.
pub fn responsibilities_direct(model: &GmmModel, x: &[f64]) -> Vec<f64> {
    let dens: Vec<f64> = (0..model.num_components)
        .map(|i| {
            let mut p = model.weights[i];
            for d in 0..model.dim {
                let var = model.variances[i][d];
                let diff = x[d] - model.means[i][d];
                p *= (-diff * diff / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
            }
            p
        })
        .collect();
    let total: f64 = dens.iter().sum();
    dens.iter().map(|p| p / total).collect()
}

pub fn random_gmm(rng: &mut impl Rng, v: usize, dim: usize) -> GmmModel {
    let raw: Vec<f64> = (0..v).map(|_| rng.random_range(0.2..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    GmmModel {
        dim,
        num_components: v,
        weights: raw.iter().map(|w| w / sum).collect(),
        means: (0..v)
            .map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect(),
        variances: (0..v)
            .map(|_| (0..dim).map(|_| rng.random_range(0.3..3.0)).collect())
            .collect(),
    }
}

pub fn random_stochastic_row(rng: &mut impl Rng, v: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..v).map(|_| rng.random_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|x| x / sum).collect()
}

/// Greedy matching of fitted rows to true rows by smallest total-variation
/// distance; returns the TV distance for each true row.
pub fn greedy_tv_match(fitted: &[Vec<f64>], truth: &[Vec<f64>]) -> (Vec<f64>, Vec<usize>) {
    let tv = |a: &[f64], b: &[f64]| -> f64 {
        0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
    };
    let mut pairs = Vec::new();
    for (i, t) in truth.iter().enumerate() {
        for (j, f) in fitted.iter().enumerate() {
            pairs.push((tv(f, t), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut dist = vec![f64::NAN; truth.len()];
    let mut true_to_fitted = vec![usize::MAX; truth.len()];
    let mut used = vec![false; fitted.len()];
    for (d, i, j) in pairs {
        if true_to_fitted[i] == usize::MAX && !used[j] {
            true_to_fitted[i] = j;
            used[j] = true;
            dist[i] = d;
        }
    }
    (dist, true_to_fitted)
}

/// Reference prefix rule: repeatedly take the heaviest remaining tuple
/// (smallest (a, b) on ties) until the kept weight reaches the target.
/// Returns the kept ids and the kept weight.
pub fn filter_oracle(
    a: &[DomainAssignment],
    b: &[DomainAssignment],
    target: f64,
) -> (BTreeSet<String>, f64, Vec<(usize, usize)>) {
    let b_map: BTreeMap<&str, usize> = b.iter().map(|x| (x.doc_id.as_str(), x.map_domain)).collect();
    let mut bins: BTreeMap<(usize, usize), (f64, Vec<String>)> = BTreeMap::new();
    for doc in a {
        let key = (doc.map_domain, b_map[doc.doc_id.as_str()]);
        let e = bins.entry(key).or_insert((0.0, Vec::new()));
        e.0 += doc.weight;
        e.1.push(doc.doc_id.clone());
    }
    let mut kept = BTreeSet::new();
    let mut kept_weight = 0.0;
    let mut order = Vec::new();
    while kept_weight < target {
        let mut best: Option<((usize, usize), f64)> = None;
        for (&key, (w, _)) in &bins {
            // BTreeMap iterates keys ascending, so strict > keeps the smallest key on ties
            if best.is_none_or(|(_, bw)| *w > bw) {
                best = Some((key, *w));
            }
        }
        let Some((key, _)) = best else { break };
        let (w, ids) = bins.remove(&key).unwrap();
        kept_weight += w;
        kept.extend(ids);
        order.push(key);
    }
    (kept, kept_weight, order)
}

/// Random small network: 0 to 2 hidden layers of width 1 to 10.
pub fn random_net(rng: &mut impl Rng, domain_dim: usize, activation: Activation) -> LdatNetwork {
    let hidden = (0..rng.random_range(0..3))
        .map(|_| rng.random_range(1..=10))
        .collect();
    LdatNetwork::new(&NetworkConfig {
        input_dim: rng.random_range(1..=10),
        domain_dim,
        hidden_dims: hidden,
        output_dim: rng.random_range(2..=10),
        activation,
        seed: rng.random(),
    })
    .unwrap()
}

pub fn random_example(rng: &mut impl Rng, net: &LdatNetwork) -> Example {
    Example {
        features: (0..net.input_dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
        ubic: (net.domain_dim > 0)
            .then(|| UbicVector::new(net.domain_dim, rng.random_range(0..net.domain_dim)).unwrap()),
        label: rng.random_range(0..net.output_dim()),
    }
}

pub fn param_mut(net: &mut LdatNetwork, layer: usize, p: usize) -> &mut f64 {
    let nw = net.layers[layer].weights.len();
    if p < nw {
        &mut net.layers[layer].weights[p]
    } else {
        &mut net.layers[layer].bias[p - nw]
    }
}

/// Central differences over every parameter, computed from the public loss.
pub fn finite_difference_error(net: &LdatNetwork, ex: &Example, eps: f64) -> f64 {
    let (_, grads) = net.loss_and_gradients(ex).unwrap();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for l in 0..net.layers.len() {
        let nw = net.layers[l].weights.len();
        for p in 0..nw + net.layers[l].bias.len() {
            let analytic = if p < nw { grads.weights[l][p] } else { grads.bias[l][p - nw] };
            let orig = *param_mut(&mut probe, l, p);
            *param_mut(&mut probe, l, p) = orig + eps;
            let up = probe.loss(ex).unwrap();
            *param_mut(&mut probe, l, p) = orig - eps;
            let down = probe.loss(ex).unwrap();
            *param_mut(&mut probe, l, p) = orig;
            let numeric = (up - down) / (2.0 * eps);
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    worst
}

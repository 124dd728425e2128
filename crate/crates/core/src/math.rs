//! Numerically stable scalar kernels shared by the probabilistic models.

use std::f64::consts::PI;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Digamma function ψ(x) for x > 0.
///
/// Arguments below 10 are shifted up with ψ(x) = ψ(x + 1) − 1/x, then the
/// asymptotic series is evaluated through the x⁻¹⁴ term (truncation error
/// below 1e-16 at x = 10). Returns NaN for x ≤ 0 or NaN input.
pub fn digamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    let mut x = x;
    let mut shift = 0.0;
    while x < 10.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli terms B_2n / (2n x^2n), Horner in x⁻²
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2
                                        * (1.0 / 132.0
                                            - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    shift + x.ln() - 0.5 * inv - series
}

/// Natural log of the gamma function for x > 0 (Stirling series after an
/// upward shift to x ≥ 10).
pub fn ln_gamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    let mut x = x;
    // Γ(x) = Γ(x + n) / (x (x + 1) ... (x + n − 1)); one log of the product
    let mut product = 1.0;
    while x < 10.0 {
        product *= x;
        x += 1.0;
    }
    let shift = -product.ln();
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            - inv2
                * (1.0 / 360.0
                    - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
    shift + (x - 0.5) * x.ln() - x + 0.5 * LN_2PI + series
}

/// `log(Σ exp(v))`, stable against overflow. Returns −∞ for an empty slice
/// or when every entry is −∞.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max.is_infinite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Normalizes log-weights in place into probabilities; returns the log normalizer.
pub fn normalize_log_in_place(values: &mut [f64]) -> f64 {
    let lse = log_sum_exp(values);
    for v in values.iter_mut() {
        *v = (*v - lse).exp();
    }
    lse
}

/// Index of the maximum entry, lowest index winning ties. NaN entries never win.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Shannon entropy in nats with the 0·log 0 = 0 convention.
pub fn entropy_nats(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &x in p {
        if x > 0.0 {
            h -= x * x.ln();
        }
    }
    h
}

/// log N(x; mean, var) for a diagonal Gaussian.
pub fn diag_gaussian_log_density(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((&xi, &mi), &vi) in x.iter().zip(mean).zip(var) {
        let d = xi - mi;
        acc += (2.0 * PI * vi).ln() + d * d / vi;
    }
    -0.5 * acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma;

    #[test]
    fn digamma_known_values() {
        // ψ(1) = −γ_E
        let euler = 0.577_215_664_901_532_9;
        assert!((digamma(1.0) + euler).abs() < 1e-13);
        // ψ(1/2) = −γ_E − 2 ln 2
        assert!((digamma(0.5) - (-euler - 2.0 * 2f64.ln())).abs() < 1e-13);
        assert!(digamma(0.0).is_nan());
        assert!(digamma(-1.0).is_nan());
    }

    #[test]
    fn digamma_matches_statrs() {
        for i in 1..2000 {
            let x = i as f64 * 0.013 + 1e-3;
            let ours = digamma(x);
            let reference = gamma::digamma(x);
            let scale = reference.abs().max(1.0);
            assert!(
                (ours - reference).abs() / scale < 1e-12,
                "x={x}: {ours} vs {reference}"
            );
        }
    }

    #[test]
    fn digamma_recurrence_holds() {
        for i in 1..200 {
            let x = i as f64 * 0.37;
            assert!((digamma(x + 1.0) - digamma(x) - 1.0 / x).abs() < 1e-12);
        }
    }

    #[test]
    fn ln_gamma_matches_statrs() {
        for i in 1..2000 {
            let x = i as f64 * 0.021 + 1e-4;
            let ours = ln_gamma(x);
            let reference = gamma::ln_gamma(x);
            let scale = reference.abs().max(1.0);
            assert!((ours - reference).abs() / scale < 1e-12, "x={x}");
        }
        assert!((ln_gamma(1.0)).abs() < 1e-13, "{}", ln_gamma(1.0));
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn log_sum_exp_edge_cases() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((log_sum_exp(&[-1000.0, 0.0]) - 0.0).abs() < 1e-12);
    }

    #[test]
    fn argmax_ties_take_lowest() {
        assert_eq!(argmax_first(&[0.5, 0.5]), 0);
        assert_eq!(argmax_first(&[0.1, 0.7, 0.7, 0.2]), 1);
        assert_eq!(argmax_first(&[0.7, 0.2, 0.1]), 0);
    }

    #[test]
    fn entropy_conventions() {
        assert_eq!(entropy_nats(&[1.0, 0.0, 0.0]), 0.0);
        let u = vec![1.0 / 16.0; 16];
        assert!((entropy_nats(&u) / 2f64.ln() - 4.0).abs() < 1e-12);
    }
}

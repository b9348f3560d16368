//! Stochastic policy heads: per-dimension Beta distributions for box
//! actions and a categorical distribution for discrete actions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use statrs::function::gamma::{digamma, ln_gamma};

/// Beta-distributed actions are clamped this far inside the open unit
/// interval before log-densities are evaluated, keeping `ln u` and
/// `ln (1-u)` finite.
pub const BETA_ACTION_CLAMP: f64 = 1e-6;

/// Numerically stable `ln(1 + exp(x))`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Map raw head outputs to Beta shape parameters, interleaved
/// `[ra_0, rb_0, ra_1, rb_1, ...] -> [(alpha_0, beta_0), ...]`. The
/// `1 + softplus` transform keeps both shapes at or above one, so densities
/// stay bounded.
pub fn beta_params_from_raw(raw: &[f64]) -> Vec<(f64, f64)> {
    assert!(raw.len() % 2 == 0, "Beta head needs two raw outputs per dim");
    raw.chunks_exact(2)
        .map(|c| (1.0 + softplus(c[0]), 1.0 + softplus(c[1])))
        .collect()
}

fn ln_beta_fn(alpha: f64, beta: f64) -> f64 {
    ln_gamma(alpha) + ln_gamma(beta) - ln_gamma(alpha + beta)
}

/// Log-density of `u` under Beta(alpha, beta), with `u` clamped inside the
/// open unit interval.
pub fn beta_log_prob(alpha: f64, beta: f64, u: f64) -> f64 {
    let u = u.clamp(BETA_ACTION_CLAMP, 1.0 - BETA_ACTION_CLAMP);
    (alpha - 1.0) * u.ln() + (beta - 1.0) * (1.0 - u).ln() - ln_beta_fn(alpha, beta)
}

/// Gradient of `beta_log_prob` with respect to `(alpha, beta)`.
pub fn beta_log_prob_grad(alpha: f64, beta: f64, u: f64) -> (f64, f64) {
    let u = u.clamp(BETA_ACTION_CLAMP, 1.0 - BETA_ACTION_CLAMP);
    let psi_sum = digamma(alpha + beta);
    (
        u.ln() - digamma(alpha) + psi_sum,
        (1.0 - u).ln() - digamma(beta) + psi_sum,
    )
}

/// Mean of Beta(alpha, beta); the deterministic action choice.
#[inline]
pub fn beta_mean(alpha: f64, beta: f64) -> f64 {
    alpha / (alpha + beta)
}

/// Draw from Beta(alpha, beta).
pub fn sample_beta(alpha: f64, beta: f64, rng: &mut ChaCha8Rng) -> f64 {
    rand_distr::Beta::new(alpha, beta)
        .expect("shape parameters exceed zero by construction")
        .sample(rng)
}

/// Log-softmax of `logits`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max
        + logits
            .iter()
            .map(|&z| (z - max).exp())
            .sum::<f64>()
            .ln();
    logits.iter().map(|&z| z - lse).collect()
}

/// Log-probability of choosing `index`.
pub fn categorical_log_prob(logits: &[f64], index: usize) -> f64 {
    log_softmax(logits)[index]
}

/// Gradient of the log-probability of `index` with respect to the logits:
/// one-hot minus softmax.
pub fn categorical_log_prob_grad(logits: &[f64], index: usize) -> Vec<f64> {
    let ls = log_softmax(logits);
    ls.iter()
        .enumerate()
        .map(|(j, &l)| (if j == index { 1.0 } else { 0.0 }) - l.exp())
        .collect()
}

/// Sample an index proportionally to `softmax(logits)` by inverse CDF.
pub fn sample_categorical(logits: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let probs: Vec<f64> = log_softmax(logits).iter().map(|l| l.exp()).collect();
    let draw = rng.gen::<f64>();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Index of the maximum value; ties resolve to the lowest index.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

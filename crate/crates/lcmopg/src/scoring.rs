//! Population scoring: return normalization, Pareto-proximity scores, and
//! k-nearest-neighbour diversity bonuses.
//!
//! Each training iteration collects one return vector per latent. Returns
//! are first normalized per objective dimension, then every trajectory gets
//! a score measuring how close its normalized return sits to the batch
//! Pareto front (members score highest), and trajectories on the profitable
//! side of the score distribution additionally earn a diversity bonus equal
//! to the distance to their k-th nearest neighbour. The combined weight
//! multiplies the log-likelihood of the trajectory in the policy loss.

use crate::error::{Error, Result};
use crate::objective_space::pareto_filter;

/// Per-dimension return normalization applied before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// (G - mean) / std
    Standard,
    /// (G - median) / interquartile range
    Robust,
    /// (G - median) / (max - min)
    MaxMin,
}

/// Location statistic used to center the scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvgMode {
    Mean,
    Median,
}

impl Normalization {
    /// Default centering statistic paired with each normalization: the
    /// outlier-robust normalizations pair with the median, the moment-based
    /// one with the mean.
    pub fn default_avg(self) -> AvgMode {
        match self {
            Normalization::Standard => AvgMode::Mean,
            Normalization::Robust | Normalization::MaxMin => AvgMode::Median,
        }
    }
}

/// Divisors below this floor are clamped to it, so batches that collapse in
/// some objective dimension normalize to zeros instead of blowing up.
pub const SCALE_FLOOR: f64 = 1e-8;

fn validate_batch(returns: &[Vec<f64>]) -> Result<usize> {
    if returns.len() < 2 {
        return Err(Error::contract(
            "normalization requires at least two return vectors",
        ));
    }
    let m = returns[0].len();
    if m == 0 {
        return Err(Error::contract("return vectors must be non-empty"));
    }
    for r in returns {
        if r.len() != m {
            return Err(Error::contract("return vectors must share one dimension"));
        }
        if !r.iter().all(|v| v.is_finite()) {
            return Err(Error::contract("return vectors must be finite"));
        }
    }
    Ok(m)
}

/// Linear-interpolation quantile of an ascending-sorted slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Normalize a batch of return vectors per objective dimension.
pub fn normalize_returns(returns: &[Vec<f64>], mode: Normalization) -> Result<Vec<Vec<f64>>> {
    let m = validate_batch(returns)?;
    let n = returns.len();
    let mut out = vec![vec![0.0; m]; n];
    let mut column = vec![0.0; n];
    for j in 0..m {
        for (i, r) in returns.iter().enumerate() {
            column[i] = r[j];
        }
        let (center, scale) = match mode {
            Normalization::Standard => {
                let mean = column.iter().sum::<f64>() / n as f64;
                let var =
                    column.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
                (mean, var.sqrt())
            }
            Normalization::Robust => {
                let mut sorted = column.clone();
                sorted.sort_by(f64::total_cmp);
                let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
                (quantile_sorted(&sorted, 0.5), iqr)
            }
            Normalization::MaxMin => {
                let mut sorted = column.clone();
                sorted.sort_by(f64::total_cmp);
                let spread = sorted[n - 1] - sorted[0];
                (quantile_sorted(&sorted, 0.5), spread)
            }
        };
        let scale = scale.max(SCALE_FLOOR);
        for i in 0..n {
            out[i][j] = (column[i] - center) / scale;
        }
    }
    Ok(out)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Pre-centering Pareto-proximity score of each normalized return.
///
/// For each point, collect the Euclidean distance to the nearest front
/// member together with the per-objective gaps to the front's coordinate
/// maxima, and negate the smallest of those quantities. Front members score
/// exactly zero; everything else scores at most zero.
pub fn pf_proximity_scores(normalized: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = validate_batch(normalized)?;
    let front_idx = pareto_filter(normalized);
    let front: Vec<&Vec<f64>> = front_idx.iter().map(|&i| &normalized[i]).collect();
    let mut maxes = vec![f64::NEG_INFINITY; m];
    for z in &front {
        for j in 0..m {
            maxes[j] = maxes[j].max(z[j]);
        }
    }
    let scores = normalized
        .iter()
        .map(|g| {
            let mut smallest = front
                .iter()
                .map(|z| euclidean(z, g))
                .fold(f64::INFINITY, f64::min);
            for j in 0..m {
                smallest = smallest.min(maxes[j] - g[j]);
            }
            -smallest
        })
        .collect();
    Ok(scores)
}

/// Full score computation: Pareto-proximity scores centered by `avg`.
pub fn compute_scores(normalized: &[Vec<f64>], avg: AvgMode) -> Result<Vec<f64>> {
    let mut scores = pf_proximity_scores(normalized)?;
    let center = match avg {
        AvgMode::Mean => scores.iter().sum::<f64>() / scores.len() as f64,
        AvgMode::Median => median(&scores),
    };
    for s in &mut scores {
        *s -= center;
    }
    Ok(scores)
}

/// Diversity bonuses: trajectories on the profitable side of the centered
/// score distribution (score at or above zero) earn the Euclidean distance
/// from their normalized return to its k-th nearest neighbour (self
/// excluded); the rest earn zero. The inclusive threshold matters: when a
/// whole batch ties on the front — every score exactly zero, the routine
/// case in environments whose returns are all Pareto-optimal — the bonus
/// remains the only driver of exploration, and a strict cutoff would
/// silence the learning signal entirely. Returns `(bonuses, masks)`.
pub fn compute_bonuses(
    normalized: &[Vec<f64>],
    scores: &[f64],
    k: usize,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let n = normalized.len();
    if scores.len() != n {
        return Err(Error::contract("scores must align with the batch"));
    }
    if k == 0 || k > n.saturating_sub(1) {
        return Err(Error::contract(format!(
            "k-nearest-neighbour order k={k} must lie in 1..={}",
            n.saturating_sub(1)
        )));
    }
    validate_batch(normalized)?;
    let mut bonuses = vec![0.0; n];
    let mut masks = vec![false; n];
    let mut dists = Vec::with_capacity(n - 1);
    for i in 0..n {
        masks[i] = scores[i] >= 0.0;
        if !masks[i] {
            continue;
        }
        dists.clear();
        for j in 0..n {
            if j != i {
                dists.push(euclidean(&normalized[i], &normalized[j]));
            }
        }
        dists.sort_by(f64::total_cmp);
        bonuses[i] = dists[k - 1];
    }
    Ok((bonuses, masks))
}

/// Final per-trajectory weights `score + beta * bonus`, clipped at zero
/// from below when `clip` is set.
pub fn combine_weights(scores: &[f64], bonuses: &[f64], beta: f64, clip: bool) -> Vec<f64> {
    scores
        .iter()
        .zip(bonuses)
        .map(|(&s, &b)| {
            let w = s + beta * b;
            if clip {
                w.max(0.0)
            } else {
                w
            }
        })
        .collect()
}

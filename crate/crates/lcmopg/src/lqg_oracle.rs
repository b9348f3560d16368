//! Ground-truth Pareto front for the linear-quadratic environment.
//!
//! For any convex weighting of the quadratic costs the optimal controller
//! is linear feedback, obtained from the fixed point of the discounted
//! discrete-time Riccati equation
//! `S = Q + gamma*S - gamma^2 * S (R + gamma*S)^-1 S`.
//! Sweeping a grid of weights, solving for each, and rolling the resulting
//! controllers in the actual environment traces out the attainable front.
//! The control law depends only on the cost matrices and the discount,
//! never on the transition-noise level.

use crate::envs::{Action, LqgEnv, MoEnv};
use crate::error::{Error, Result};
use crate::objective_space::ParetoArchive;
use crate::rngutil::{derive_stream, StreamKind};
use nalgebra::DMatrix;
use rayon::prelude::*;

/// Converged fixed point of the discounted Riccati equation.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    s: DMatrix<f64>,
    residual: f64,
}

impl RiccatiSolution {
    /// The symmetric positive-definite cost-to-go matrix.
    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    /// Frobenius norm of `S - rhs(S)` at the accepted iterate.
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

fn check_spd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::contract(format!("{name} must be square")));
    }
    let asym = (m - m.transpose()).norm();
    if asym > 1e-12 {
        return Err(Error::contract(format!(
            "{name} must be symmetric (asymmetry {asym:.3e})"
        )));
    }
    if m.clone().cholesky().is_none() {
        return Err(Error::contract(format!(
            "{name} must be positive definite"
        )));
    }
    Ok(())
}

/// Iterate `S <- Q + gamma*S - gamma^2 * S (R + gamma*S)^-1 S` from
/// `S = Q` until the Frobenius residual drops to `tol`.
pub fn solve_riccati(
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<RiccatiSolution> {
    check_spd("Q", q)?;
    check_spd("R", r)?;
    if q.nrows() != r.nrows() {
        return Err(Error::contract("Q and R must have matching dimensions"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::contract("gamma must lie in (0, 1)"));
    }
    if !(tol > 0.0) {
        return Err(Error::contract("tol must be positive"));
    }
    let mut s = q.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let a = r + gamma * &s;
        let x = a
            .cholesky()
            .ok_or_else(|| Error::Numeric("R + gamma*S lost positive definiteness".into()))?
            .solve(&s);
        let mut next = q + gamma * &s - gamma * gamma * (&s * x);
        // The update preserves symmetry analytically; resymmetrize to stop
        // floating-point drift from accumulating across iterations.
        next = (&next + next.transpose()) * 0.5;
        residual = (&next - &s).norm();
        s = next;
        if residual <= tol {
            check_spd("S", &s)?;
            return Ok(RiccatiSolution { s, residual });
        }
    }
    Err(Error::Numeric(format!(
        "Riccati iteration did not reach tol={tol:.1e} in {max_iter} iterations \
         (final residual {residual:.3e})"
    )))
}

/// Feedback gain `K = gamma (R + gamma*S)^-1 S`; the optimal action is
/// `a = -K s`.
pub fn optimal_gain(sol: &RiccatiSolution, r: &DMatrix<f64>, gamma: f64) -> Result<DMatrix<f64>> {
    let a = r + gamma * &sol.s;
    let inv = a
        .cholesky()
        .ok_or_else(|| Error::Numeric("R + gamma*S is not positive definite".into()))?
        .solve(&sol.s);
    Ok(gamma * inv)
}

/// The optimal linear-feedback action `-gamma (R + gamma*S)^-1 S s`.
pub fn optimal_action(
    sol: &RiccatiSolution,
    r: &DMatrix<f64>,
    gamma: f64,
    state: &[f64],
) -> Result<Vec<f64>> {
    let k = optimal_gain(sol, r, gamma)?;
    let s = DMatrix::from_column_slice(state.len(), 1, state);
    Ok((-(k * s)).column(0).iter().copied().collect())
}

/// All weight vectors with entries that are positive multiples of
/// `1/divisions` summing to one: the interior lattice of the simplex.
/// For two objectives and 100 divisions this is the 99-point grid
/// `{0.01, ..., 0.99}`; for three it is the 4851-point mesh.
pub fn simplex_grid(m: usize, divisions: usize) -> Vec<Vec<f64>> {
    fn rec(m: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if m == 1 {
            if left >= 1 {
                prefix.push(left);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        for k in 1..=left.saturating_sub(m - 1) {
            prefix.push(k);
            rec(m - 1, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut parts = Vec::new();
    rec(m, divisions, &mut Vec::new(), &mut parts);
    parts
        .into_iter()
        .map(|p| p.iter().map(|&k| k as f64 / divisions as f64).collect())
        .collect()
}

/// Scalarized cost matrices `Q_w = sum w_i Q_i`, `R_w = sum w_i R_i`.
pub fn weighted_costs(env: &LqgEnv, weights: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = env.m();
    let mut qd = vec![0.0; m];
    let mut rd = vec![0.0; m];
    for (i, &w) in weights.iter().enumerate() {
        for j in 0..m {
            qd[j] += w * env.q_diag(i)[j];
            rd[j] += w * env.r_diag(i)[j];
        }
    }
    (
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(qd)),
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(rd)),
    )
}

/// Discounted return of the linear controller `a = -K s` over one episode.
fn rollout_gain(
    env: &LqgEnv,
    gain: &DMatrix<f64>,
    gamma: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<f64> {
    let m = env.m();
    let mut state = env.reset(rng);
    let mut ret = vec![0.0; m];
    let mut disc = 1.0;
    loop {
        let s = DMatrix::from_column_slice(m, 1, &state[..m]);
        let a: Vec<f64> = (-(gain * s)).column(0).iter().copied().collect();
        let out = env.step(&state, &Action::Continuous(a), rng);
        for (acc, r) in ret.iter_mut().zip(&out.reward) {
            *acc += disc * r;
        }
        disc *= gamma;
        state = out.state;
        if out.done {
            break;
        }
    }
    ret
}

/// Sweep a weight grid, solve each scalarization, roll the controllers in
/// the environment, and return the nondominated returns together with
/// their hypervolume against `ref_point`.
///
/// Noise-free environments get a single deterministic episode per weight;
/// noisy ones average `episodes_per_weight` rollouts. The archive stores
/// the weight vector alongside each return.
pub fn oracle_pf(
    env: &LqgEnv,
    gamma: f64,
    weights: &[Vec<f64>],
    episodes_per_weight: usize,
    ref_point: &[f64],
    seed: u64,
) -> Result<(ParetoArchive, f64)> {
    let m = env.m();
    if weights.is_empty() {
        return Err(Error::contract("weight grid is empty"));
    }
    if episodes_per_weight == 0 {
        return Err(Error::contract("episodes_per_weight must be >= 1"));
    }
    for w in weights {
        if w.len() != m {
            return Err(Error::contract("weight dimension mismatch"));
        }
        if w.iter().any(|&x| x < 0.0) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::contract(
                "weights must be nonnegative and sum to one",
            ));
        }
    }

    let episodes = if env.sigma() == 0.0 {
        1
    } else {
        episodes_per_weight
    };
    let returns: Result<Vec<Vec<f64>>> = weights
        .par_iter()
        .enumerate()
        .map(|(widx, w)| {
            let (q, r) = weighted_costs(env, w);
            let sol = solve_riccati(&q, &r, gamma, 1e-12, 5000)?;
            let gain = optimal_gain(&sol, &r, gamma)?;
            let mut mean = vec![0.0; m];
            for ep in 0..episodes {
                let mut rng =
                    derive_stream(seed, StreamKind::Oracle, widx as u64, ep as u64);
                let ret = rollout_gain(env, &gain, gamma, &mut rng);
                for (acc, r) in mean.iter_mut().zip(&ret) {
                    *acc += r / episodes as f64;
                }
            }
            Ok(mean)
        })
        .collect();
    let returns = returns?;

    let mut archive = ParetoArchive::new();
    for (ret, w) in returns.into_iter().zip(weights) {
        archive.push(ret, w.clone());
    }
    let archive = archive.nondominated();
    let hv = archive.hypervolume(ref_point)?;
    Ok((archive, hv))
}

//! Linear-quadratic-Gaussian control with `m` competing quadratic costs.
//!
//! The state and action both live in `R^m`. The dynamics are a noisy
//! integrator, `s' = s + a + sigma * eps` with standard normal `eps`, and
//! objective `i` pays the quadratic cost
//! `r_i = -(s^T Q_i s + a^T R_i a)` where `Q_i` weights coordinate `i`
//! heavily and `R_i` weights every other coordinate heavily, so the
//! objectives pull the controller in different directions.

use super::{Action, ActionSpace, MoEnv, StepOut};
use crate::error::{Error, Result};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Off-diagonal state-cost weight; the favoured coordinate gets `1 - XI`.
pub const LQG_XI: f64 = 0.1;

/// Linear-quadratic environment with `m` objectives.
#[derive(Debug, Clone)]
pub struct LqgEnv {
    m: usize,
    sigma: f64,
    horizon: usize,
    start: f64,
    bound: f64,
}

impl LqgEnv {
    /// Stochastic variant with transition noise `sigma`.
    pub fn new(m: usize, sigma: f64) -> Result<LqgEnv> {
        if m < 2 {
            return Err(Error::contract("at least two objectives required"));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::contract("sigma must be finite and nonnegative"));
        }
        Ok(LqgEnv {
            m,
            sigma,
            horizon: 30,
            start: 10.0,
            bound: 10.0,
        })
    }

    /// Noise-free variant.
    pub fn deterministic(m: usize) -> Result<LqgEnv> {
        LqgEnv::new(m, 0.0)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Half-width of the symmetric action box.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Diagonal of the state-cost matrix for objective `i`.
    pub fn q_diag(&self, i: usize) -> Vec<f64> {
        (0..self.m)
            .map(|j| if j == i { 1.0 - LQG_XI } else { LQG_XI })
            .collect()
    }

    /// Diagonal of the action-cost matrix for objective `i`.
    pub fn r_diag(&self, i: usize) -> Vec<f64> {
        (0..self.m)
            .map(|j| if j == i { LQG_XI } else { 1.0 - LQG_XI })
            .collect()
    }

    fn reward(&self, s: &[f64], a: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|i| {
                let qs: f64 = self
                    .q_diag(i)
                    .iter()
                    .zip(s)
                    .map(|(q, x)| q * x * x)
                    .sum();
                let ra: f64 = self
                    .r_diag(i)
                    .iter()
                    .zip(a)
                    .map(|(r, x)| r * x * x)
                    .sum();
                -(qs + ra)
            })
            .collect()
    }
}

impl MoEnv for LqgEnv {
    fn objectives(&self) -> usize {
        self.m
    }

    fn obs_dim(&self) -> usize {
        self.m
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Box {
            dim: self.m,
            lo: -self.bound,
            hi: self.bound,
        }
    }

    // State layout: [s_1 .. s_m, t].
    fn reset(&self, _rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut state = vec![self.start; self.m];
        state.push(0.0);
        state
    }

    fn step(&self, state: &[f64], action: &Action, rng: &mut ChaCha8Rng) -> StepOut {
        let s = &state[..self.m];
        let t = state[self.m] as usize;
        let a: Vec<f64> = match action {
            Action::Continuous(v) => {
                assert_eq!(v.len(), self.m, "action dimension mismatch");
                v.iter().map(|x| x.clamp(-self.bound, self.bound)).collect()
            }
            Action::Discrete(_) => panic!("continuous action expected"),
        };
        let reward = self.reward(s, &a);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut next: Vec<f64> = s
            .iter()
            .zip(&a)
            .map(|(x, u)| x + u + self.sigma * normal.sample(rng))
            .collect();
        next.push((t + 1) as f64);
        StepOut {
            state: next,
            reward,
            done: t + 1 >= self.horizon,
        }
    }

    fn observe(&self, state: &[f64]) -> Vec<f64> {
        state[..self.m].to_vec()
    }
}

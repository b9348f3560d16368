//! Multi-objective benchmark environments.
//!
//! Environments are immutable dynamics objects: `reset` produces an initial
//! state vector, `step` maps `(state, action)` to the next state, a reward
//! vector, and a termination flag. All stochasticity flows through the
//! caller-supplied RNG, so identical streams reproduce identical episodes.
//! `observe` converts a raw state into the feature vector consumed by the
//! policy (already shifted/scaled; cosine embedding happens inside the
//! policy when configured).

mod dst;
mod ftn;
mod lqg;
mod minecart;

pub use dst::{dst_exact_pf, DstEnv, DstMap, DST_CONVEX_VALUES, DST_ORIGINAL_VALUES};
pub use ftn::{ftn_random_leaves, FtnEnv};
pub use lqg::LqgEnv;
pub use minecart::{MinecartConfig, MinecartEnv, MineSpec};

use rand_chacha::ChaCha8Rng;

/// Action container shared across discrete and box action spaces.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

/// Action-space descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionSpace {
    Discrete(usize),
    /// Uniform box `[lo, hi]^dim`.
    Box { dim: usize, lo: f64, hi: f64 },
}

/// Result of one environment transition.
#[derive(Debug, Clone)]
pub struct StepOut {
    pub state: Vec<f64>,
    pub reward: Vec<f64>,
    pub done: bool,
}

/// A multi-objective environment with vector rewards.
pub trait MoEnv: Send + Sync {
    /// Number of objectives (reward vector length).
    fn objectives(&self) -> usize;

    /// Length of the observation vector produced by `observe`.
    fn obs_dim(&self) -> usize;

    fn action_space(&self) -> ActionSpace;

    /// Initial state. Deterministic environments ignore the RNG.
    fn reset(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;

    /// One transition from `state` under `action`.
    fn step(&self, state: &[f64], action: &Action, rng: &mut ChaCha8Rng) -> StepOut;

    /// Policy-facing features for a raw state.
    fn observe(&self, state: &[f64]) -> Vec<f64>;
}

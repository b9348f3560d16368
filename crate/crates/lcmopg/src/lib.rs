//! Latent-conditioned multi-objective policy gradient.
//!
//! This crate implements the LC-MOPG family of multi-objective
//! reinforcement-learning algorithms: a single stochastic policy is
//! conditioned on a latent vector drawn from a fixed prior, and a
//! Pareto-front-shaping score plus a k-nearest-neighbour diversity bonus
//! steer the population of latent-conditioned behaviours toward a wide,
//! near-optimal Pareto front. A variance-reduced variant (LC-MOPG-V)
//! replaces the per-trajectory weight with a state-action baseline learned
//! by auxiliary Q/V networks.
//!
//! The crate ships four benchmark environments (Deep Sea Treasure,
//! Fruit Tree Navigation, multi-objective LQG control, and Minecart),
//! exact Pareto-front generators where closed forms exist, an LQG oracle
//! built on a discounted Riccati solver, and an exact hypervolume
//! implementation used by the evaluation harness.

pub mod checkpoint;
pub mod csvio;
pub mod envs;
pub mod error;
pub mod harness;
pub mod lqg_oracle;
pub mod neural;
pub mod objective_space;
pub mod policy;
pub mod rngutil;
pub mod scoring;
pub mod trainer;

pub use error::{Error, Result};

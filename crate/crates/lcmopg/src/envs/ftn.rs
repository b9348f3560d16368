//! Fruit Tree Navigation: descend a full binary tree of depth `d`; each of
//! the `2^d` leaves carries a six-dimensional nutrient reward and every
//! leaf lies on the Pareto front.
//!
//! The state is `(level, index)`. Actions 0/1 move to the left/right child.
//! The episode always lasts exactly `d` steps, with the single non-zero
//! reward arriving on the final transition.

use super::{Action, ActionSpace, MoEnv, StepOut};
use crate::error::{Error, Result};
use crate::objective_space::dominates;
use crate::rngutil::{derive_stream, StreamKind};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Objectives carried by each leaf.
pub const FTN_OBJECTIVES: usize = 6;

/// Fruit Tree Navigation environment.
#[derive(Debug, Clone)]
pub struct FtnEnv {
    depth: usize,
    leaves: Vec<Vec<f64>>,
}

impl FtnEnv {
    /// Build from an explicit leaf-reward table (`2^depth` rows of six
    /// values, mutually nondominated).
    pub fn new(depth: usize, leaves: Vec<Vec<f64>>) -> Result<FtnEnv> {
        if depth == 0 || depth > 20 {
            return Err(Error::contract("depth must lie in 1..=20"));
        }
        if leaves.len() != 1 << depth {
            return Err(Error::contract(format!(
                "expected {} leaves, got {}",
                1usize << depth,
                leaves.len()
            )));
        }
        for row in &leaves {
            if row.len() != FTN_OBJECTIVES {
                return Err(Error::contract("leaf rewards must have six components"));
            }
            if !row.iter().all(|v| v.is_finite()) {
                return Err(Error::contract("leaf rewards must be finite"));
            }
        }
        for (i, a) in leaves.iter().enumerate() {
            for b in leaves.iter().skip(i + 1) {
                if dominates(a, b) || dominates(b, a) {
                    return Err(Error::contract(
                        "leaf table violates mutual nondominance",
                    ));
                }
            }
        }
        Ok(FtnEnv { depth, leaves })
    }

    /// Build from a generated leaf table (see [`ftn_random_leaves`]).
    pub fn generated(depth: usize, seed: u64) -> FtnEnv {
        FtnEnv::new(depth, ftn_random_leaves(depth, seed, 10.0))
            .expect("generated table satisfies the invariants")
    }

    /// Load a leaf table from CSV text: one row per leaf, six numeric
    /// columns, `#` comments allowed.
    pub fn from_csv(depth: usize, csv: &str) -> Result<FtnEnv> {
        let mut leaves = Vec::new();
        for (lineno, line) in csv.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row: Result<Vec<f64>> = line
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|e| {
                        Error::Parse(format!("line {}: {e}", lineno + 1))
                    })
                })
                .collect();
            leaves.push(row?);
        }
        FtnEnv::new(depth, leaves)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn leaves(&self) -> &[Vec<f64>] {
        &self.leaves
    }

    /// Leaf rewards as seen in a discounted return: the reward lands on
    /// step `depth - 1`, so every leaf return is `gamma^(depth-1) * leaf`.
    pub fn leaf_returns(&self, gamma: f64) -> Vec<Vec<f64>> {
        let scale = gamma.powi(self.depth as i32 - 1);
        self.leaves
            .iter()
            .map(|leaf| leaf.iter().map(|v| v * scale).collect())
            .collect()
    }
}

impl MoEnv for FtnEnv {
    fn objectives(&self) -> usize {
        FTN_OBJECTIVES
    }

    fn obs_dim(&self) -> usize {
        2
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(2)
    }

    fn reset(&self, _rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![0.0, 0.0]
    }

    fn step(&self, state: &[f64], action: &Action, _rng: &mut ChaCha8Rng) -> StepOut {
        let (level, index) = (state[0] as usize, state[1] as usize);
        let a = match action {
            Action::Discrete(i) => *i,
            Action::Continuous(_) => panic!("discrete action expected"),
        };
        assert!(a < 2, "binary tree actions are 0 or 1");
        assert!(level < self.depth, "stepping past a leaf");
        let next_level = level + 1;
        let next_index = 2 * index + a;
        let done = next_level == self.depth;
        let reward = if done {
            self.leaves[next_index].clone()
        } else {
            vec![0.0; FTN_OBJECTIVES]
        };
        StepOut {
            state: vec![next_level as f64, next_index as f64],
            reward,
            done,
        }
    }

    fn observe(&self, state: &[f64]) -> Vec<f64> {
        let level = state[0];
        let index = state[1];
        vec![
            level / self.depth as f64,
            index / (1u64 << (level as u32)) as f64,
        ]
    }
}

/// Generate `2^depth` random leaf rewards of equal Euclidean norm `norm`
/// on the positive orthant of the sphere. Equal norms guarantee mutual
/// nondominance; the construction retries astronomically unlikely
/// duplicate directions.
pub fn ftn_random_leaves(depth: usize, seed: u64, norm: f64) -> Vec<Vec<f64>> {
    let n = 1usize << depth;
    let mut rng = derive_stream(seed, StreamKind::Misc, 0xf7, depth as u64);
    let normal: Normal<f64> = Normal::new(0.0, 1.0).unwrap();
    let mut leaves: Vec<Vec<f64>> = Vec::with_capacity(n);
    while leaves.len() < n {
        let raw: Vec<f64> = (0..FTN_OBJECTIVES)
            .map(|_| normal.sample(&mut rng).abs())
            .collect();
        let len = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len < 1e-9 {
            continue;
        }
        let leaf: Vec<f64> = raw.iter().map(|v| v / len * norm).collect();
        let duplicate = leaves.iter().any(|prev: &Vec<f64>| {
            prev.iter()
                .zip(&leaf)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                < 1e-9
        });
        if !duplicate {
            leaves.push(leaf);
        }
    }
    leaves
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective_space::pareto_filter;

    fn rng() -> ChaCha8Rng {
        derive_stream(52, StreamKind::Misc, 0, 0)
    }

    #[test]
    fn episode_lasts_exactly_depth_steps() {
        let env = FtnEnv::generated(5, 0);
        let mut state = env.reset(&mut rng());
        let mut steps = 0;
        loop {
            let out = env.step(&state, &Action::Discrete(1), &mut rng());
            steps += 1;
            if steps < 5 {
                assert!(!out.done);
                assert!(out.reward.iter().all(|&r| r == 0.0));
            } else {
                assert!(out.done);
                break;
            }
            state = out.state;
        }
        assert_eq!(steps, 5);
    }

    #[test]
    fn action_sequence_selects_the_binary_coded_leaf() {
        let env = FtnEnv::generated(5, 1);
        // actions 1,0,1,1,0 -> index 0b10110 = 22
        let mut state = env.reset(&mut rng());
        let mut last = None;
        for a in [1usize, 0, 1, 1, 0] {
            let out = env.step(&state, &Action::Discrete(a), &mut rng());
            state = out.state.clone();
            last = Some(out);
        }
        let out = last.unwrap();
        assert!(out.done);
        assert_eq!(state[1] as usize, 22);
        assert_eq!(out.reward, env.leaves()[22]);
    }

    #[test]
    fn every_leaf_is_on_the_front() {
        let env = FtnEnv::generated(6, 2);
        let keep = pareto_filter(env.leaves());
        assert_eq!(keep.len(), 64);
    }

    #[test]
    fn observe_normalizes_level_and_index() {
        let env = FtnEnv::generated(5, 3);
        assert_eq!(env.observe(&[0.0, 0.0]), vec![0.0, 0.0]);
        let obs = env.observe(&[3.0, 5.0]);
        assert!((obs[0] - 0.6).abs() < 1e-15);
        assert!((obs[1] - 5.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn generator_produces_equal_norm_distinct_leaves() {
        let leaves = ftn_random_leaves(5, 7, 10.0);
        assert_eq!(leaves.len(), 32);
        for leaf in &leaves {
            let norm = leaf.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 10.0).abs() < 1e-9, "norm {norm}");
            assert!(leaf.iter().all(|&v| v >= 0.0));
        }
        for (i, a) in leaves.iter().enumerate() {
            for b in leaves.iter().skip(i + 1) {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn generator_is_deterministic_per_seed() {
        assert_eq!(ftn_random_leaves(5, 7, 10.0), ftn_random_leaves(5, 7, 10.0));
        assert_ne!(ftn_random_leaves(5, 7, 10.0), ftn_random_leaves(5, 8, 10.0));
    }

    #[test]
    fn csv_round_trip() {
        let env = FtnEnv::generated(5, 9);
        let mut csv = String::from("# leaf table\n");
        for leaf in env.leaves() {
            let row: Vec<String> = leaf.iter().map(|v| format!("{v:.17}")).collect();
            csv.push_str(&row.join(","));
            csv.push('\n');
        }
        let loaded = FtnEnv::from_csv(5, &csv).unwrap();
        for (a, b) in env.leaves().iter().zip(loaded.leaves()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn loader_rejects_bad_tables() {
        // wrong row count
        assert!(FtnEnv::from_csv(5, "1,2,3,4,5,6\n").is_err());
        // dominated rows (depth 1: two leaves)
        let dominated = "2,2,2,2,2,2\n1,1,1,1,1,1\n";
        assert!(FtnEnv::from_csv(1, dominated).is_err());
        // non-numeric
        let bad = "a,b,c,d,e,f\n1,1,1,1,1,2\n";
        assert!(FtnEnv::from_csv(1, bad).is_err());
    }

    #[test]
    fn leaf_returns_apply_terminal_discount() {
        let env = FtnEnv::generated(5, 4);
        let rets = env.leaf_returns(0.99);
        let scale = 0.99f64.powi(4);
        for (ret, leaf) in rets.iter().zip(env.leaves()) {
            for (r, l) in ret.iter().zip(leaf) {
                assert!((r - l * scale).abs() < 1e-12);
            }
        }
    }
}

//! Deep Sea Treasure: a submarine explores an 11x11 seabed grid holding ten
//! treasures of increasing value at increasing depth.
//!
//! Objectives (in order): treasure value collected, time penalty. Every
//! step costs -1 time; reaching a treasure cell yields its value and ends
//! the episode; moving onto seabed ends the episode with no treasure. Moves
//! that would leave the grid keep the submarine in place (still costing a
//! step).

use super::{Action, ActionSpace, MoEnv, StepOut};
use crate::error::{Error, Result};
use crate::objective_space::pareto_filter;
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

/// Treasure values of the convex-front variant.
pub const DST_CONVEX_VALUES: [f64; 10] =
    [0.7, 8.2, 11.5, 14.0, 15.1, 16.1, 19.6, 20.3, 22.4, 23.7];

/// Treasure values of the original (concave-front) variant.
pub const DST_ORIGINAL_VALUES: [f64; 10] =
    [1.0, 2.0, 3.0, 5.0, 8.0, 16.0, 24.0, 50.0, 74.0, 124.0];

const DEFAULT_MAP: &str = include_str!("../../assets/dst_grid.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cell {
    Water,
    Seabed,
    Treasure(usize),
}

/// Parsed seabed map: grid geometry plus start and treasure cells.
#[derive(Debug, Clone)]
pub struct DstMap {
    cells: Vec<Vec<Cell>>,
    start: (usize, usize),
    n_treasures: usize,
}

impl DstMap {
    /// Parse a map from its ASCII form (see `assets/dst_grid.txt`).
    /// `;`-prefixed lines are comments (`#` is the seabed cell).
    pub fn parse(text: &str) -> Result<DstMap> {
        let mut rows: Vec<Vec<Cell>> = Vec::new();
        let mut start = None;
        let mut treasure_ids = Vec::new();
        for line in text.lines() {
            let line = line.trim_end();
            if line.starts_with(';') || line.is_empty() {
                continue;
            }
            let mut row = Vec::with_capacity(line.len());
            for ch in line.chars() {
                let cell = match ch {
                    '.' => Cell::Water,
                    'S' => {
                        if start.replace((rows.len(), row.len())).is_some() {
                            return Err(Error::Parse("multiple start cells".into()));
                        }
                        Cell::Water
                    }
                    '#' => Cell::Seabed,
                    d if d.is_ascii_alphanumeric() => {
                        let id = d
                            .to_digit(36)
                            .ok_or_else(|| Error::Parse(format!("bad cell '{d}'")))?
                            as usize;
                        treasure_ids.push(id);
                        Cell::Treasure(id)
                    }
                    other => return Err(Error::Parse(format!("bad cell '{other}'"))),
                };
                row.push(cell);
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse("empty map".into()));
        }
        let width = rows[0].len();
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Parse("ragged map rows".into()));
        }
        let start = start.ok_or_else(|| Error::Parse("map lacks a start cell".into()))?;
        treasure_ids.sort_unstable();
        if treasure_ids.is_empty()
            || treasure_ids[0] != 0
            || treasure_ids.windows(2).any(|w| w[1] != w[0] + 1)
        {
            return Err(Error::Parse(
                "treasure indices must be 0..n without gaps or repeats".into(),
            ));
        }
        Ok(DstMap {
            cells: rows,
            start,
            n_treasures: treasure_ids.len(),
        })
    }

    /// The map shipped with the crate.
    pub fn bundled() -> DstMap {
        DstMap::parse(DEFAULT_MAP).expect("bundled map parses")
    }

    pub fn rows(&self) -> usize {
        self.cells.len()
    }

    pub fn cols(&self) -> usize {
        self.cells[0].len()
    }

    pub fn n_treasures(&self) -> usize {
        self.n_treasures
    }

    /// Shortest step counts from the start to each treasure, moving through
    /// open water only (breadth-first search; treasure cells terminate a
    /// path and are not traversed).
    pub fn treasure_distances(&self) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n_treasures];
        let mut seen = vec![vec![false; self.cols()]; self.rows()];
        let mut queue = VecDeque::new();
        seen[self.start.0][self.start.1] = true;
        queue.push_back((self.start, 0usize));
        while let Some(((r, c), d)) = queue.pop_front() {
            for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let nr = r as i64 + dr;
                let nc = c as i64 + dc;
                if nr < 0 || nc < 0 || nr >= self.rows() as i64 || nc >= self.cols() as i64 {
                    continue;
                }
                let (nr, nc) = (nr as usize, nc as usize);
                if seen[nr][nc] {
                    continue;
                }
                seen[nr][nc] = true;
                match self.cells[nr][nc] {
                    Cell::Water => queue.push_back(((nr, nc), d + 1)),
                    Cell::Treasure(id) => dist[id] = dist[id].min(d + 1),
                    Cell::Seabed => {}
                }
            }
        }
        dist
    }
}

/// Deep Sea Treasure environment: a map plus per-treasure values.
#[derive(Debug, Clone)]
pub struct DstEnv {
    map: DstMap,
    values: Vec<f64>,
}

impl DstEnv {
    pub fn new(map: DstMap, values: Vec<f64>) -> Result<DstEnv> {
        if values.len() != map.n_treasures() {
            return Err(Error::contract(format!(
                "map has {} treasures but {} values were given",
                map.n_treasures(),
                values.len()
            )));
        }
        Ok(DstEnv { map, values })
    }

    /// Bundled map with the convex-front treasure values.
    pub fn convex() -> DstEnv {
        DstEnv::new(DstMap::bundled(), DST_CONVEX_VALUES.to_vec()).unwrap()
    }

    /// Bundled map with the original treasure values.
    pub fn original() -> DstEnv {
        DstEnv::new(DstMap::bundled(), DST_ORIGINAL_VALUES.to_vec()).unwrap()
    }

    pub fn map(&self) -> &DstMap {
        &self.map
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl MoEnv for DstEnv {
    fn objectives(&self) -> usize {
        2
    }

    fn obs_dim(&self) -> usize {
        2
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(4)
    }

    fn reset(&self, _rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![self.map.start.0 as f64, self.map.start.1 as f64]
    }

    fn step(&self, state: &[f64], action: &Action, _rng: &mut ChaCha8Rng) -> StepOut {
        let (r, c) = (state[0] as i64, state[1] as i64);
        let idx = match action {
            Action::Discrete(i) => *i,
            Action::Continuous(_) => panic!("discrete action expected"),
        };
        let (dr, dc) = match idx {
            0 => (-1, 0),
            1 => (1, 0),
            2 => (0, -1),
            3 => (0, 1),
            other => panic!("action index {other} out of range"),
        };
        let mut nr = r + dr;
        let mut nc = c + dc;
        if nr < 0 || nc < 0 || nr >= self.map.rows() as i64 || nc >= self.map.cols() as i64 {
            nr = r;
            nc = c;
        }
        let (treasure, done) = match self.map.cells[nr as usize][nc as usize] {
            Cell::Water => (0.0, false),
            Cell::Seabed => (0.0, true),
            Cell::Treasure(id) => (self.values[id], true),
        };
        StepOut {
            state: vec![nr as f64, nc as f64],
            reward: vec![treasure, -1.0],
            done,
        }
    }

    fn observe(&self, state: &[f64]) -> Vec<f64> {
        vec![
            state[0] / (self.map.rows() - 1) as f64,
            state[1] / (self.map.cols() - 1) as f64,
        ]
    }
}

/// Exact Pareto front of a Deep Sea Treasure instance under discount
/// `gamma`: for each treasure at shortest distance `L`, the return of the
/// shortest path is `(value * gamma^(L-1), -sum_{t<L} gamma^t)`; dominated
/// entries (possible with custom value sets) are filtered out.
pub fn dst_exact_pf(env: &DstEnv, gamma: f64) -> Result<Vec<Vec<f64>>> {
    if !(0.0 < gamma && gamma <= 1.0) {
        return Err(Error::contract("gamma must lie in (0, 1]"));
    }
    let dists = env.map.treasure_distances();
    let mut points = Vec::with_capacity(dists.len());
    for (id, &l) in dists.iter().enumerate() {
        if l == usize::MAX {
            return Err(Error::contract(format!("treasure {id} is unreachable")));
        }
        let time: f64 = -(0..l).map(|t| gamma.powi(t as i32)).sum::<f64>();
        let treasure = env.values[id] * gamma.powi(l as i32 - 1);
        points.push(vec![treasure, time]);
    }
    let keep = pareto_filter(&points);
    Ok(keep.into_iter().map(|i| points[i].clone()).collect())
}

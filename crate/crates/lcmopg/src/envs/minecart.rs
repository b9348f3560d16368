//! Minecart: drive a cart around the unit square, collect two ore types
//! from five mines, and sell the cargo back at the home base while paying
//! for fuel.
//!
//! Returns are three-dimensional: `(ore1, ore2, -fuel)`. Ore is paid out
//! only on the step the cart re-enters the home base after having left
//! it; fuel accrues every step. All dynamics are deterministic.
//!
//! The world is described by a small key-value config (see
//! [`MinecartConfig::parse`]); the bundled default is compiled in.

use super::{Action, ActionSpace, MoEnv, StepOut};
use crate::error::{Error, Result};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::f64::consts::PI;

const BUNDLED_CONFIG: &str = include_str!("../../assets/minecart.cfg");

/// Actions, in index order.
pub const MINECART_ACTIONS: [&str; 6] =
    ["Mine", "TurnLeft", "TurnRight", "Accelerate", "Brake", "None"];

const ACT_MINE: usize = 0;
const ACT_LEFT: usize = 1;
const ACT_RIGHT: usize = 2;
const ACT_ACCEL: usize = 3;
const ACT_BRAKE: usize = 4;

// State layout.
const IX: usize = 0;
const IY: usize = 1;
const ISPEED: usize = 2;
const ITHETA: usize = 3;
const IORE1: usize = 4;
const IORE2: usize = 5;
const IDEPARTED: usize = 6;
const ITIME: usize = 7;
const STATE_DIM: usize = 8;

/// One mine: a disc the cart can extract ore from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MineSpec {
    pub x: f64,
    pub y: f64,
    /// Share of this mine's yield that is ore 1; the rest is ore 2.
    pub ore1_fraction: f64,
}

/// World constants for the minecart environment.
#[derive(Debug, Clone, PartialEq)]
pub struct MinecartConfig {
    pub home_radius: f64,
    pub mine_arc_radius: f64,
    pub mine_radius: f64,
    pub mine_angles_deg: Vec<f64>,
    pub ore1_fractions: Vec<f64>,
    pub capacity: f64,
    pub mine_yield: f64,
    pub frame_skip: usize,
    pub max_speed: f64,
    pub acceleration: f64,
    pub deceleration: f64,
    pub rotation_deg: f64,
    pub fuel_idle: f64,
    pub fuel_accelerate: f64,
    pub fuel_mine: f64,
    pub max_steps: usize,
    pub start_angle_deg: f64,
}

impl MinecartConfig {
    /// The compiled-in default world.
    pub fn bundled() -> MinecartConfig {
        MinecartConfig::parse(BUNDLED_CONFIG).expect("bundled config is valid")
    }

    /// Parse a `key = value` config with `#` comments. Every key is
    /// required, unknown keys are rejected, and the geometry is validated.
    pub fn parse(text: &str) -> Result<MinecartConfig> {
        let mut map: HashMap<String, String> = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            if map
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::Parse(format!("duplicate key `{key}`")));
            }
        }

        let mut take = |key: &str| -> Result<String> {
            map.remove(key)
                .ok_or_else(|| Error::Parse(format!("missing key `{key}`")))
        };
        let f = |key: &str, raw: String| -> Result<f64> {
            raw.parse::<f64>()
                .map_err(|e| Error::Parse(format!("key `{key}`: {e}")))
        };
        let list = |key: &str, raw: String| -> Result<Vec<f64>> {
            raw.split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("key `{key}`: {e}")))
                })
                .collect()
        };
        let int = |key: &str, raw: String| -> Result<usize> {
            raw.parse::<usize>()
                .map_err(|e| Error::Parse(format!("key `{key}`: {e}")))
        };

        let cfg = MinecartConfig {
            home_radius: f("home_radius", take("home_radius")?)?,
            mine_arc_radius: f("mine_arc_radius", take("mine_arc_radius")?)?,
            mine_radius: f("mine_radius", take("mine_radius")?)?,
            mine_angles_deg: list("mine_angles_deg", take("mine_angles_deg")?)?,
            ore1_fractions: list("ore1_fractions", take("ore1_fractions")?)?,
            capacity: f("capacity", take("capacity")?)?,
            mine_yield: f("mine_yield", take("mine_yield")?)?,
            frame_skip: int("frame_skip", take("frame_skip")?)?,
            max_speed: f("max_speed", take("max_speed")?)?,
            acceleration: f("acceleration", take("acceleration")?)?,
            deceleration: f("deceleration", take("deceleration")?)?,
            rotation_deg: f("rotation_deg", take("rotation_deg")?)?,
            fuel_idle: f("fuel_idle", take("fuel_idle")?)?,
            fuel_accelerate: f("fuel_accelerate", take("fuel_accelerate")?)?,
            fuel_mine: f("fuel_mine", take("fuel_mine")?)?,
            max_steps: int("max_steps", take("max_steps")?)?,
            start_angle_deg: f("start_angle_deg", take("start_angle_deg")?)?,
        };
        if let Some(key) = map.keys().next() {
            return Err(Error::Parse(format!("unknown key `{key}`")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("home_radius", self.home_radius),
            ("mine_arc_radius", self.mine_arc_radius),
            ("mine_radius", self.mine_radius),
            ("capacity", self.capacity),
            ("mine_yield", self.mine_yield),
            ("max_speed", self.max_speed),
            ("acceleration", self.acceleration),
            ("deceleration", self.deceleration),
            ("rotation_deg", self.rotation_deg),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::contract(format!("{name} must be positive")));
            }
        }
        let nonnegative = [
            ("fuel_idle", self.fuel_idle),
            ("fuel_accelerate", self.fuel_accelerate),
            ("fuel_mine", self.fuel_mine),
        ];
        for (name, v) in nonnegative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::contract(format!("{name} must be nonnegative")));
            }
        }
        if self.frame_skip == 0 || self.max_steps == 0 {
            return Err(Error::contract("frame_skip and max_steps must be >= 1"));
        }
        if self.mine_angles_deg.is_empty()
            || self.mine_angles_deg.len() != self.ore1_fractions.len()
        {
            return Err(Error::contract(
                "mine_angles_deg and ore1_fractions must be nonempty and equal-length",
            ));
        }
        if !self.ore1_fractions.iter().all(|&f| (0.0..=1.0).contains(&f)) {
            return Err(Error::contract("ore1_fractions must lie in [0, 1]"));
        }
        if self.mine_yield > self.capacity {
            return Err(Error::contract("mine_yield must not exceed capacity"));
        }
        // Every mine disc must fit in the unit square and stay clear of home.
        for &deg in &self.mine_angles_deg {
            let (x, y) = polar(self.mine_arc_radius, deg);
            let inside = x - self.mine_radius >= 0.0
                && y - self.mine_radius >= 0.0
                && x + self.mine_radius <= 1.0
                && y + self.mine_radius <= 1.0;
            if !inside {
                return Err(Error::contract(format!(
                    "mine at {deg} degrees leaves the unit square"
                )));
            }
            if (x * x + y * y).sqrt() <= self.home_radius + self.mine_radius {
                return Err(Error::contract(format!(
                    "mine at {deg} degrees overlaps the home base"
                )));
            }
        }
        Ok(())
    }
}

fn polar(radius: f64, angle_deg: f64) -> (f64, f64) {
    let a = angle_deg * PI / 180.0;
    (radius * a.cos(), radius * a.sin())
}

/// The minecart environment.
#[derive(Debug, Clone)]
pub struct MinecartEnv {
    cfg: MinecartConfig,
    mines: Vec<MineSpec>,
}

impl MinecartEnv {
    pub fn new(cfg: MinecartConfig) -> MinecartEnv {
        let mines = cfg
            .mine_angles_deg
            .iter()
            .zip(&cfg.ore1_fractions)
            .map(|(&deg, &frac)| {
                let (x, y) = polar(cfg.mine_arc_radius, deg);
                MineSpec {
                    x,
                    y,
                    ore1_fraction: frac,
                }
            })
            .collect();
        MinecartEnv { cfg, mines }
    }

    /// Environment over the compiled-in default world.
    pub fn bundled() -> MinecartEnv {
        MinecartEnv::new(MinecartConfig::bundled())
    }

    pub fn config(&self) -> &MinecartConfig {
        &self.cfg
    }

    pub fn mines(&self) -> &[MineSpec] {
        &self.mines
    }

    fn mine_at(&self, x: f64, y: f64) -> Option<&MineSpec> {
        self.mines
            .iter()
            .find(|m| ((m.x - x).powi(2) + (m.y - y).powi(2)).sqrt() <= self.cfg.mine_radius)
    }

    /// Every cargo mix `(ore1, ore2)` that exactly fills the cart, sorted
    /// by ore 1. Together with any fuel cost these sit on the Pareto
    /// front of the return space: total ore is maximal and the mixes
    /// trade one ore type against the other.
    pub fn full_capacity_cargos(&self) -> Vec<(f64, f64)> {
        let cfg = &self.cfg;
        // Filling the cart takes `full` untruncated picks plus one pick
        // truncated to `last` (which equals `mine_yield` when capacity is
        // an exact multiple, i.e. `last == 0` and the final pick is full).
        let picks = (cfg.capacity / cfg.mine_yield).ceil() as usize;
        let full = picks - 1;
        let last = cfg.capacity - full as f64 * cfg.mine_yield;
        let mut sums: Vec<f64> = vec![0.0];
        for _ in 0..full {
            let mut next = Vec::new();
            for s in &sums {
                for frac in &cfg.ore1_fractions {
                    next.push(s + cfg.mine_yield * frac);
                }
            }
            sums = dedup_sorted(next);
        }
        let mut ore1: Vec<f64> = Vec::new();
        for s in &sums {
            for frac in &cfg.ore1_fractions {
                ore1.push(s + last * frac);
            }
        }
        dedup_sorted(ore1)
            .into_iter()
            .map(|o1| (o1, cfg.capacity - o1))
            .collect()
    }
}

fn dedup_sorted(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    values
}

impl MoEnv for MinecartEnv {
    fn objectives(&self) -> usize {
        3
    }

    fn obs_dim(&self) -> usize {
        6
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(MINECART_ACTIONS.len())
    }

    fn reset(&self, _rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut state = vec![0.0; STATE_DIM];
        state[ITHETA] = self.cfg.start_angle_deg * PI / 180.0;
        state
    }

    fn step(&self, state: &[f64], action: &Action, _rng: &mut ChaCha8Rng) -> StepOut {
        let cfg = &self.cfg;
        let a = match action {
            Action::Discrete(i) => *i,
            Action::Continuous(_) => panic!("discrete action expected"),
        };
        assert!(a < MINECART_ACTIONS.len(), "unknown action index {a}");
        let mut next = state.to_vec();
        let mut fuel = 0.0;
        let rotation = cfg.rotation_deg * PI / 180.0;
        for _ in 0..cfg.frame_skip {
            match a {
                ACT_LEFT => next[ITHETA] += rotation,
                ACT_RIGHT => next[ITHETA] -= rotation,
                ACT_ACCEL => {
                    next[ISPEED] = (next[ISPEED] + cfg.acceleration).min(cfg.max_speed);
                    fuel += cfg.fuel_accelerate;
                }
                ACT_BRAKE => next[ISPEED] = (next[ISPEED] - cfg.deceleration).max(0.0),
                _ => {}
            }
            next[IX] = (next[IX] + next[ISPEED] * next[ITHETA].cos()).clamp(0.0, 1.0);
            next[IY] = (next[IY] + next[ISPEED] * next[ITHETA].sin()).clamp(0.0, 1.0);
            fuel += cfg.fuel_idle;
            if (next[IX].powi(2) + next[IY].powi(2)).sqrt() > cfg.home_radius {
                next[IDEPARTED] = 1.0;
            }
        }
        if a == ACT_MINE {
            fuel += cfg.fuel_mine;
            if let Some(mine) = self.mine_at(next[IX], next[IY]) {
                let room = cfg.capacity - next[IORE1] - next[IORE2];
                let take = cfg.mine_yield.min(room).max(0.0);
                next[IORE1] += take * mine.ore1_fraction;
                next[IORE2] += take * (1.0 - mine.ore1_fraction);
            }
        }
        next[ITIME] += 1.0;

        let mut reward = vec![0.0, 0.0, -fuel];
        let home = (next[IX].powi(2) + next[IY].powi(2)).sqrt() <= cfg.home_radius;
        let sold = next[IDEPARTED] == 1.0 && home;
        if sold {
            reward[0] = next[IORE1];
            reward[1] = next[IORE2];
        }
        let done = sold || next[ITIME] as usize >= cfg.max_steps;
        StepOut {
            state: next,
            reward,
            done,
        }
    }

    fn observe(&self, state: &[f64]) -> Vec<f64> {
        let cfg = &self.cfg;
        vec![
            state[IX],
            state[IY],
            state[ISPEED] / cfg.max_speed,
            state[ITHETA].rem_euclid(2.0 * PI) / (2.0 * PI),
            state[IORE1] / cfg.capacity,
            state[IORE2] / cfg.capacity,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngutil::{derive_stream, StreamKind};

    fn rng() -> ChaCha8Rng {
        derive_stream(73, StreamKind::Misc, 0, 0)
    }

    fn env() -> MinecartEnv {
        MinecartEnv::bundled()
    }

    /// A state parked at the centre of mine `k` with the given cargo.
    fn parked_at_mine(env: &MinecartEnv, k: usize, ore1: f64, ore2: f64) -> Vec<f64> {
        let mine = env.mines()[k];
        let mut state = vec![0.0; STATE_DIM];
        state[IX] = mine.x;
        state[IY] = mine.y;
        state[IDEPARTED] = 1.0;
        state[IORE1] = ore1;
        state[IORE2] = ore2;
        state
    }

    #[test]
    fn bundled_config_parses_and_places_five_mines() {
        let env = env();
        assert_eq!(env.mines().len(), 5);
        let first = env.mines()[0];
        assert!((first.x - 0.65 * (PI / 12.0).cos()).abs() < 1e-12);
        assert!((first.y - 0.65 * (PI / 12.0).sin()).abs() < 1e-12);
        assert_eq!(first.ore1_fraction, 1.0);
        assert_eq!(env.mines()[4].ore1_fraction, 0.0);
    }

    #[test]
    fn parser_rejects_unknown_missing_and_duplicate_keys() {
        assert!(MinecartConfig::parse("home_radius = 0.15").is_err());
        let with_extra = format!("{BUNDLED_CONFIG}\nwarp_drive = 1\n");
        assert!(MinecartConfig::parse(&with_extra).is_err());
        let with_dup = format!("{BUNDLED_CONFIG}\nhome_radius = 0.2\n");
        assert!(MinecartConfig::parse(&with_dup).is_err());
    }

    #[test]
    fn parser_rejects_bad_geometry() {
        let pushed_out = BUNDLED_CONFIG.replace("mine_arc_radius = 0.65", "mine_arc_radius = 1.2");
        assert!(MinecartConfig::parse(&pushed_out).is_err());
        let overlapping = BUNDLED_CONFIG.replace("home_radius = 0.15", "home_radius = 0.6");
        assert!(MinecartConfig::parse(&overlapping).is_err());
    }

    #[test]
    fn mining_at_a_mine_fills_the_cart_by_fraction() {
        let env = env();
        // Mine 2 splits its yield evenly.
        let state = parked_at_mine(&env, 2, 0.0, 0.0);
        let out = env.step(&state, &Action::Discrete(ACT_MINE), &mut rng());
        assert!((out.state[IORE1] - 0.1875).abs() < 1e-12);
        assert!((out.state[IORE2] - 0.1875).abs() < 1e-12);
        // Mine 0 is pure ore 1.
        let state = parked_at_mine(&env, 0, 0.0, 0.0);
        let out = env.step(&state, &Action::Discrete(ACT_MINE), &mut rng());
        assert!((out.state[IORE1] - 0.375).abs() < 1e-12);
        assert_eq!(out.state[IORE2], 0.0);
    }

    #[test]
    fn mining_truncates_at_capacity() {
        let env = env();
        let state = parked_at_mine(&env, 0, 0.7, 0.7); // room for 0.1
        let out = env.step(&state, &Action::Discrete(ACT_MINE), &mut rng());
        assert!((out.state[IORE1] - 0.8).abs() < 1e-12);
        let full = parked_at_mine(&env, 0, 0.75, 0.75);
        let out = env.step(&full, &Action::Discrete(ACT_MINE), &mut rng());
        assert!((out.state[IORE1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn mining_away_from_mines_yields_nothing_but_costs_fuel() {
        let env = env();
        let mut state = vec![0.0; STATE_DIM];
        state[IX] = 0.9;
        state[IY] = 0.1;
        state[IDEPARTED] = 1.0;
        let out = env.step(&state, &Action::Discrete(ACT_MINE), &mut rng());
        assert_eq!(out.state[IORE1], 0.0);
        // Four idle frames plus the mining attempt.
        let expected = 4.0 * 0.005 + 0.05;
        assert!((out.reward[2] + expected).abs() < 1e-12);
    }

    #[test]
    fn every_step_burns_fuel() {
        let env = env();
        let mut state = env.reset(&mut rng());
        for a in [5, 3, 1, 2, 4, 0] {
            let out = env.step(&state, &Action::Discrete(a), &mut rng());
            assert!(out.reward[2] < 0.0, "action {a} burned no fuel");
            state = out.state;
        }
    }

    #[test]
    fn acceleration_caps_at_max_speed_and_brake_floors_at_zero() {
        let env = env();
        let mut state = env.reset(&mut rng());
        for _ in 0..10 {
            state = env.step(&state, &Action::Discrete(ACT_ACCEL), &mut rng()).state;
            assert!(state[ISPEED] <= 0.05 + 1e-15);
        }
        assert!((state[ISPEED] - 0.05).abs() < 1e-12);
        for _ in 0..10 {
            state = env.step(&state, &Action::Discrete(ACT_BRAKE), &mut rng()).state;
            assert!(state[ISPEED] >= 0.0);
        }
        assert_eq!(state[ISPEED], 0.0);
    }

    #[test]
    fn position_stays_in_the_unit_square() {
        let env = env();
        let mut state = env.reset(&mut rng());
        // Accelerate hard along the start heading until the walls clamp.
        for _ in 0..120 {
            let out = env.step(&state, &Action::Discrete(ACT_ACCEL), &mut rng());
            state = out.state;
            assert!((0.0..=1.0).contains(&state[IX]));
            assert!((0.0..=1.0).contains(&state[IY]));
            if out.done {
                break;
            }
        }
        assert!((state[IX] - 1.0).abs() < 1e-12);
        assert!((state[IY] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn turning_rotates_the_heading_by_the_frame_rate() {
        let env = env();
        let state = env.reset(&mut rng());
        let out = env.step(&state, &Action::Discrete(ACT_LEFT), &mut rng());
        let expected = (45.0 + 4.0 * 6.0) * PI / 180.0;
        assert!((out.state[ITHETA] - expected).abs() < 1e-12);
        let out = env.step(&state, &Action::Discrete(ACT_RIGHT), &mut rng());
        let expected = (45.0 - 4.0 * 6.0) * PI / 180.0;
        assert!((out.state[ITHETA] - expected).abs() < 1e-12);
    }

    #[test]
    fn returning_home_sells_the_cargo_and_ends_the_episode() {
        let env = env();
        // Rolling toward the origin from just outside the home boundary.
        let mut state = vec![0.0; STATE_DIM];
        state[IX] = 0.16;
        state[IY] = 0.0;
        state[ISPEED] = 0.05;
        state[ITHETA] = PI; // heading in -x
        state[IORE1] = 0.5;
        state[IORE2] = 1.0;
        state[IDEPARTED] = 1.0;
        let out = env.step(&state, &Action::Discrete(5), &mut rng());
        assert!(out.done);
        assert_eq!(out.reward[0], 0.5);
        assert_eq!(out.reward[1], 1.0);
        assert!(out.reward[2] < 0.0);
    }

    #[test]
    fn idling_at_home_before_departure_does_not_terminate() {
        let env = env();
        let state = env.reset(&mut rng());
        let out = env.step(&state, &Action::Discrete(5), &mut rng());
        assert!(!out.done);
        assert_eq!(out.state[IDEPARTED], 0.0);
        assert_eq!(out.reward[..2], [0.0, 0.0]);
    }

    #[test]
    fn episode_is_cut_off_at_max_steps() {
        let env = env();
        let mut state = env.reset(&mut rng());
        let mut steps = 0;
        loop {
            let out = env.step(&state, &Action::Discrete(5), &mut rng());
            steps += 1;
            state = out.state;
            if out.done {
                break;
            }
        }
        assert_eq!(steps, 1000);
    }

    #[test]
    fn full_capacity_cargo_mixes_form_the_quarter_grid() {
        let env = env();
        let cargos = env.full_capacity_cargos();
        assert_eq!(cargos.len(), 17);
        let step = 0.375 / 4.0;
        for (k, (o1, o2)) in cargos.iter().enumerate() {
            assert!((o1 - k as f64 * step).abs() < 1e-12);
            assert!((o1 + o2 - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn observation_is_bounded_and_resolves_heading() {
        let env = env();
        let mut state = env.reset(&mut rng());
        state[ISPEED] = 0.05;
        state[IORE1] = 0.75;
        let obs = env.observe(&state);
        assert_eq!(obs.len(), 6);
        assert!(obs.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(obs[2], 1.0);
        assert_eq!(obs[4], 0.5);
        // Opposite vertical headings must map to distinct angle fractions.
        let mut up = state.clone();
        up[ITHETA] = PI / 2.0;
        let mut down = state.clone();
        down[ITHETA] = -PI / 2.0;
        assert!((env.observe(&up)[3] - 0.25).abs() < 1e-12);
        assert!((env.observe(&down)[3] - 0.75).abs() < 1e-12);
    }
}

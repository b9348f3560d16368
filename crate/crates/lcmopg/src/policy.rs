//! The latent-conditioned policy network and its training gradients.
//!
//! One network represents a continuum of policies indexed by a latent
//! vector `c` drawn uniformly from the unit cube: a state tower (SELU) and
//! a latent tower (Tanh, fed the cosine embedding of `c`) produce
//! equal-width features that are mixed by elementwise product and passed
//! through a SELU trunk to the distribution head — per-dimension Beta for
//! box actions, categorical for discrete ones. The latent is held fixed
//! for a whole episode, so distinct latents behave as distinct policies.

use crate::envs::{Action, ActionSpace, MoEnv, StepOut};
use crate::error::{Error, Result};
use crate::neural::{
    argmax_lowest, beta_log_prob, beta_log_prob_grad, beta_mean, beta_params_from_raw,
    categorical_log_prob, categorical_log_prob_grad, cosine_embed, embedded_dim, init_params,
    sample_beta, sample_categorical, Activation, MlpSpec,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Number of slices the trajectory batch is split into for parallel
/// gradient accumulation. Fixed (rather than tied to the thread count) so
/// the floating-point reduction order, and hence every training run, is
/// bit-reproducible on any machine.
const GRAD_CHUNKS: usize = 64;

/// Distribution head of the policy.
#[derive(Debug, Clone, PartialEq)]
pub enum HeadKind {
    /// Discrete actions via softmax over `n_actions` logits.
    Categorical { n_actions: usize },
    /// Box actions: one Beta distribution per dimension on (0,1), affinely
    /// mapped to `[lo, hi]`.
    Beta { dim: usize, lo: f64, hi: f64 },
}

impl HeadKind {
    /// The head matching an environment's action space.
    pub fn for_env(env: &dyn MoEnv) -> HeadKind {
        match env.action_space() {
            ActionSpace::Discrete(n) => HeadKind::Categorical { n_actions: n },
            ActionSpace::Box { dim, lo, hi } => HeadKind::Beta { dim, lo, hi },
        }
    }

    /// Raw outputs the trunk must produce.
    fn raw_dim(&self) -> usize {
        match self {
            HeadKind::Categorical { n_actions } => *n_actions,
            HeadKind::Beta { dim, .. } => 2 * dim,
        }
    }
}

/// Architecture hyperparameters of a latent-conditioned policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub obs_dim: usize,
    /// Per-coordinate cosine embedding widths for the observation, or
    /// `None` to feed the observation in raw.
    pub state_embed: Option<Vec<usize>>,
    pub d_lat: usize,
    /// Cosine harmonics per latent coordinate.
    pub latent_k: usize,
    /// Tower and trunk width.
    pub width: usize,
    /// Number of SELU trunk layers after mixing.
    pub depth: usize,
    pub head: HeadKind,
}

impl PolicyConfig {
    fn validate(&self) -> Result<()> {
        if self.obs_dim == 0 || self.d_lat == 0 || self.latent_k == 0 || self.width == 0 {
            return Err(Error::contract(
                "obs_dim, d_lat, latent_k, and width must all be positive",
            ));
        }
        if let Some(widths) = &self.state_embed {
            if widths.len() != self.obs_dim || widths.iter().any(|&w| w == 0) {
                return Err(Error::contract(
                    "state_embed needs one positive width per observation coordinate",
                ));
            }
        }
        if let HeadKind::Beta { dim, lo, hi } = &self.head {
            if *dim == 0 || !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::contract("Beta head needs dim >= 1 and lo < hi"));
            }
        }
        if let HeadKind::Categorical { n_actions } = &self.head {
            if *n_actions < 2 {
                return Err(Error::contract("categorical head needs >= 2 actions"));
            }
        }
        Ok(())
    }

    fn state_input_dim(&self) -> usize {
        match &self.state_embed {
            Some(widths) => embedded_dim(widths),
            None => self.obs_dim,
        }
    }
}

/// One step of an episode, as stored for gradient computation and value
/// regression. `unit` is the head-space action: the sampled point in
/// (0,1)^dim for Beta heads, a one-hot vector for categorical heads.
#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Action,
    pub unit: Vec<f64>,
    pub reward: Vec<f64>,
}

/// A full episode together with the latent that produced it and its
/// discounted vector return.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    pub latent: Vec<f64>,
    pub ret: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Recompute the discounted return from the stored rewards.
    pub fn recompute_return(&self, objectives: usize, gamma: f64) -> Vec<f64> {
        let mut ret = vec![0.0; objectives];
        let mut disc = 1.0;
        for tr in &self.transitions {
            for (acc, r) in ret.iter_mut().zip(&tr.reward) {
                *acc += disc * r;
            }
            disc *= gamma;
        }
        ret
    }
}

/// How actions are chosen during a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutMode {
    Stochastic,
    Deterministic,
}

/// Draw a latent uniformly from the unit cube.
pub fn sample_latent(d_lat: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..d_lat).map(|_| rng.gen::<f64>()).collect()
}

/// The latent-conditioned policy: all parameters live in one flat buffer
/// packed `[state tower | latent tower | trunk]`.
#[derive(Debug, Clone)]
pub struct PolicyNet {
    cfg: PolicyConfig,
    state_tower: MlpSpec,
    latent_tower: MlpSpec,
    trunk: MlpSpec,
    params: Vec<f64>,
}

struct ForwardCache {
    state: crate::neural::MlpCache,
    latent: crate::neural::MlpCache,
    trunk: crate::neural::MlpCache,
    raw: Vec<f64>,
}

impl PolicyNet {
    pub fn new(cfg: PolicyConfig, rng: &mut ChaCha8Rng) -> Result<PolicyNet> {
        cfg.validate()?;
        let state_tower = MlpSpec::new(
            vec![cfg.state_input_dim(), cfg.width],
            vec![Activation::Selu],
        );
        let latent_tower = MlpSpec::new(
            vec![cfg.d_lat * cfg.latent_k, cfg.width],
            vec![Activation::Tanh],
        );
        let trunk = MlpSpec::trunk(cfg.width, cfg.width, cfg.depth, cfg.head.raw_dim());
        let total =
            state_tower.param_count() + latent_tower.param_count() + trunk.param_count();
        let params = init_params(total, rng);
        Ok(PolicyNet {
            cfg,
            state_tower,
            latent_tower,
            trunk,
            params,
        })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::contract(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params = params;
        Ok(())
    }

    fn split_params<'a>(&self, params: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let sp = self.state_tower.param_count();
        let lp = self.latent_tower.param_count();
        (&params[..sp], &params[sp..sp + lp], &params[sp + lp..])
    }

    fn state_input(&self, obs: &[f64]) -> Vec<f64> {
        assert_eq!(obs.len(), self.cfg.obs_dim, "observation dimension");
        match &self.cfg.state_embed {
            Some(widths) => cosine_embed(obs, widths),
            None => obs.to_vec(),
        }
    }

    fn latent_input(&self, latent: &[f64]) -> Vec<f64> {
        assert_eq!(latent.len(), self.cfg.d_lat, "latent dimension");
        let widths = vec![self.cfg.latent_k; self.cfg.d_lat];
        cosine_embed(latent, &widths)
    }

    /// Raw head outputs (logits or interleaved Beta shape pre-images).
    pub fn head_raw(&self, obs: &[f64], latent: &[f64]) -> Vec<f64> {
        let (ps, pl, pt) = self.split_params(&self.params);
        let st = self.state_tower.forward(ps, &self.state_input(obs));
        let lt = self.latent_tower.forward(pl, &self.latent_input(latent));
        let mix: Vec<f64> = st.iter().zip(&lt).map(|(a, b)| a * b).collect();
        self.trunk.forward(pt, &mix)
    }

    fn forward_cached(&self, params: &[f64], obs: &[f64], latent: &[f64]) -> ForwardCache {
        let (ps, pl, pt) = self.split_params(params);
        let (st, sc) = self
            .state_tower
            .forward_cached(ps, &self.state_input(obs));
        let (lt, lc) = self
            .latent_tower
            .forward_cached(pl, &self.latent_input(latent));
        let mix: Vec<f64> = st.iter().zip(&lt).map(|(a, b)| a * b).collect();
        let (raw, tc) = self.trunk.forward_cached(pt, &mix);
        ForwardCache {
            state: sc,
            latent: lc,
            trunk: tc,
            raw,
        }
    }

    fn checked_raw(&self, obs: &[f64], latent: &[f64]) -> Result<Vec<f64>> {
        let raw = self.head_raw(obs, latent);
        if raw.iter().all(|v| v.is_finite()) {
            Ok(raw)
        } else {
            Err(Error::Numeric(format!(
                "policy head produced a non-finite output: {raw:?}"
            )))
        }
    }

    /// Sample an action. Returns the environment-space action, the
    /// head-space `unit` vector, and the log-probability of the draw.
    pub fn act_stochastic(
        &self,
        obs: &[f64],
        latent: &[f64],
        rng: &mut ChaCha8Rng,
    ) -> Result<(Action, Vec<f64>, f64)> {
        let raw = self.checked_raw(obs, latent)?;
        match &self.cfg.head {
            HeadKind::Categorical { n_actions } => {
                let idx = sample_categorical(&raw, rng);
                let logp = categorical_log_prob(&raw, idx);
                let mut unit = vec![0.0; *n_actions];
                unit[idx] = 1.0;
                Ok((Action::Discrete(idx), unit, logp))
            }
            HeadKind::Beta { lo, hi, .. } => {
                let shapes = beta_params_from_raw(&raw);
                let mut unit = Vec::with_capacity(shapes.len());
                let mut logp = 0.0;
                for &(a, b) in &shapes {
                    let u = sample_beta(a, b, rng);
                    logp += beta_log_prob(a, b, u);
                    unit.push(u);
                }
                let env_action = unit.iter().map(|u| lo + (hi - lo) * u).collect();
                Ok((Action::Continuous(env_action), unit, logp))
            }
        }
    }

    /// Deterministic evaluation-time action: categorical argmax (lowest
    /// index on ties) or the per-dimension Beta mean mapped to the box.
    pub fn act_deterministic(&self, obs: &[f64], latent: &[f64]) -> Result<Action> {
        let raw = self.checked_raw(obs, latent)?;
        match &self.cfg.head {
            HeadKind::Categorical { .. } => Ok(Action::Discrete(argmax_lowest(&raw))),
            HeadKind::Beta { lo, hi, .. } => {
                let env_action = beta_params_from_raw(&raw)
                    .iter()
                    .map(|&(a, b)| lo + (hi - lo) * beta_mean(a, b))
                    .collect();
                Ok(Action::Continuous(env_action))
            }
        }
    }

    /// Log-probability of a stored transition under the current parameters.
    pub fn log_prob(&self, tr: &Transition, latent: &[f64]) -> Result<f64> {
        let raw = self.checked_raw(&tr.obs, latent)?;
        Ok(self.log_prob_from_raw(&raw, tr))
    }

    fn log_prob_from_raw(&self, raw: &[f64], tr: &Transition) -> f64 {
        match &self.cfg.head {
            HeadKind::Categorical { .. } => match tr.action {
                Action::Discrete(idx) => categorical_log_prob(raw, idx),
                Action::Continuous(_) => panic!("discrete transition expected"),
            },
            HeadKind::Beta { .. } => beta_params_from_raw(raw)
                .iter()
                .zip(&tr.unit)
                .map(|(&(a, b), &u)| beta_log_prob(a, b, u))
                .sum(),
        }
    }

    /// d log pi / d raw for a stored transition.
    fn log_prob_grad_raw(&self, raw: &[f64], tr: &Transition) -> Vec<f64> {
        match &self.cfg.head {
            HeadKind::Categorical { .. } => match tr.action {
                Action::Discrete(idx) => categorical_log_prob_grad(raw, idx),
                Action::Continuous(_) => panic!("discrete transition expected"),
            },
            HeadKind::Beta { .. } => {
                let shapes = beta_params_from_raw(raw);
                let mut grad = Vec::with_capacity(raw.len());
                for (k, &(a, b)) in shapes.iter().enumerate() {
                    let (da, db) = beta_log_prob_grad(a, b, tr.unit[k]);
                    // alpha = 1 + softplus(raw); d alpha / d raw = sigmoid(raw).
                    grad.push(da * sigmoid(raw[2 * k]));
                    grad.push(db * sigmoid(raw[2 * k + 1]));
                }
                grad
            }
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Run one episode with a fixed latent. The discounted return uses
/// discount `gamma^t` with `t` starting at 0; `max_steps == 0` yields an
/// empty trajectory with zero return.
pub fn rollout(
    policy: &PolicyNet,
    env: &dyn MoEnv,
    latent: &[f64],
    gamma: f64,
    max_steps: usize,
    mode: RolloutMode,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::contract("gamma must lie in (0, 1]"));
    }
    let mut state = env.reset(rng);
    let mut transitions = Vec::new();
    let mut ret = vec![0.0; env.objectives()];
    let mut disc = 1.0;
    for _ in 0..max_steps {
        let obs = env.observe(&state);
        let (action, unit) = match mode {
            RolloutMode::Stochastic => {
                let (a, u, _) = policy.act_stochastic(&obs, latent, rng)?;
                (a, u)
            }
            RolloutMode::Deterministic => {
                let a = policy.act_deterministic(&obs, latent)?;
                let u = match (&a, &policy.cfg.head) {
                    (Action::Discrete(i), HeadKind::Categorical { n_actions }) => {
                        let mut one = vec![0.0; *n_actions];
                        one[*i] = 1.0;
                        one
                    }
                    (Action::Continuous(v), HeadKind::Beta { lo, hi, .. }) => {
                        v.iter().map(|x| (x - lo) / (hi - lo)).collect()
                    }
                    _ => unreachable!("head and action kind always agree"),
                };
                (a, u)
            }
        };
        let StepOut {
            state: next,
            reward,
            done,
        } = env.step(&state, &action, rng);
        for (acc, r) in ret.iter_mut().zip(&reward) {
            *acc += disc * r;
        }
        disc *= gamma;
        transitions.push(Transition {
            obs,
            action,
            unit,
            reward,
        });
        state = next;
        if done {
            break;
        }
    }
    Ok(Trajectory {
        transitions,
        latent: latent.to_vec(),
        ret,
    })
}

/// Trajectory weighting for the policy loss: one scalar per trajectory, or
/// one weight per transition.
#[derive(Debug, Clone)]
pub enum TrajectoryWeights {
    PerTrajectory(Vec<f64>),
    PerTransition(Vec<Vec<f64>>),
}

impl TrajectoryWeights {
    fn validate(&self, trajectories: &[Trajectory]) -> Result<()> {
        match self {
            TrajectoryWeights::PerTrajectory(w) => {
                if w.len() != trajectories.len() {
                    return Err(Error::contract("one weight per trajectory required"));
                }
                if !w.iter().all(|x| x.is_finite()) {
                    return Err(Error::contract("trajectory weights must be finite"));
                }
            }
            TrajectoryWeights::PerTransition(w) => {
                if w.len() != trajectories.len()
                    || w.iter()
                        .zip(trajectories)
                        .any(|(wi, t)| wi.len() != t.len())
                {
                    return Err(Error::contract(
                        "per-transition weights must match trajectory lengths",
                    ));
                }
                if !w.iter().flatten().all(|x| x.is_finite()) {
                    return Err(Error::contract("transition weights must be finite"));
                }
            }
        }
        Ok(())
    }

    fn weight(&self, traj: usize, step: usize) -> f64 {
        match self {
            TrajectoryWeights::PerTrajectory(w) => w[traj],
            TrajectoryWeights::PerTransition(w) => w[traj][step],
        }
    }
}

/// Loss `-sum_i sum_t w_{i,t} log pi(a_t | s_t, c_i)` and its exact
/// gradient with respect to every policy parameter. Zero-weight
/// trajectories contribute nothing (and cost nothing).
pub fn policy_loss_and_grad(
    policy: &PolicyNet,
    trajectories: &[Trajectory],
    weights: &TrajectoryWeights,
) -> Result<(f64, Vec<f64>)> {
    weights.validate(trajectories)?;
    let n_params = policy.param_count();
    let chunk = trajectories.len().div_ceil(GRAD_CHUNKS).max(1);
    let partials: Vec<(f64, Vec<f64>)> = trajectories
        .par_chunks(chunk)
        .enumerate()
        .map(|(chunk_idx, chunk_trajs)| {
            let base = chunk_idx * chunk;
            let mut loss = 0.0;
            let mut grad = vec![0.0; n_params];
            let (ps, pl, pt) = policy.split_params(&policy.params);
            let sp = ps.len();
            let lp = pl.len();
            for (offset, traj) in chunk_trajs.iter().enumerate() {
                let i = base + offset;
                if let TrajectoryWeights::PerTrajectory(w) = weights {
                    if w[i] == 0.0 {
                        continue;
                    }
                }
                for (t, tr) in traj.transitions.iter().enumerate() {
                    let w = weights.weight(i, t);
                    if w == 0.0 {
                        continue;
                    }
                    let cache = policy.forward_cached(&policy.params, &tr.obs, &traj.latent);
                    loss -= w * policy.log_prob_from_raw(&cache.raw, tr);
                    let d_raw: Vec<f64> = policy
                        .log_prob_grad_raw(&cache.raw, tr)
                        .iter()
                        .map(|g| -w * g)
                        .collect();
                    let (grad_s, rest) = grad.split_at_mut(sp);
                    let (grad_l, grad_t) = rest.split_at_mut(lp);
                    let d_mix = policy.trunk.backward(pt, &cache.trunk, &d_raw, grad_t);
                    let st = cache.state.output();
                    let lt = cache.latent.output();
                    let d_st: Vec<f64> = d_mix.iter().zip(lt).map(|(d, y)| d * y).collect();
                    let d_lt: Vec<f64> = d_mix.iter().zip(st).map(|(d, y)| d * y).collect();
                    policy.state_tower.backward(ps, &cache.state, &d_st, grad_s);
                    policy
                        .latent_tower
                        .backward(pl, &cache.latent, &d_lt, grad_l);
                }
            }
            (loss, grad)
        })
        .collect();

    let mut loss = 0.0;
    let mut grad = vec![0.0; n_params];
    for (l, g) in partials {
        loss += l;
        for (acc, v) in grad.iter_mut().zip(&g) {
            *acc += v;
        }
    }
    if !loss.is_finite() {
        return Err(Error::Numeric(format!(
            "policy loss is not finite ({loss})"
        )));
    }
    Ok((loss, grad))
}

//! Parameterized MDPs, rollouts and Monte-Carlo return estimation.
//!
//! The environment parameter `p` is fixed for a whole trajectory and never
//! shown to the policy; [`Trajectory::parameter`] records it for diagnostics
//! only.

mod chain;
mod mass;

use alloc::vec::Vec;

// inherent float methods shadow these in some builds
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;

use crate::error::{Error, Result};
use crate::policy::Policy;

pub use chain::{chain_return_distribution, chain_value_function, exact_chain_return, ParamChainEnv, LEFT, RIGHT};
pub use mass::ParamMassEnv;

/// Default bound on the discounted reward lost by truncating a rollout.
pub const DEFAULT_TAIL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    Discrete(usize),
    Continuous(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Discrete(usize),
    Continuous(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

/// A parameterized MDP: dynamics and rewards take the environment parameter
/// as an extra argument and are expected to depend on it continuously.
pub trait Pmdp {
    fn name(&self) -> &'static str;
    /// Dimension of the environment parameter.
    fn param_dim(&self) -> usize;
    fn gamma(&self) -> f64;
    /// Bound on `|reward|` for every transition.
    fn r_max(&self) -> f64;
    fn state_space(&self) -> SpaceKind;
    fn action_space(&self) -> SpaceKind;
    /// Episode length cap built into the environment, if any.
    fn max_horizon(&self) -> Option<usize> {
        None
    }
    /// Rejects parameters outside the environment's admissible range.
    fn check_param(&self, p: &[f64]) -> Result<()>;
    fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> State;
    /// Samples the next state and returns it with the transition reward.
    fn step<R: Rng + ?Sized>(&self, state: &State, action: &Action, p: &[f64], rng: &mut R) -> Result<(State, f64)>;
    fn is_terminal(&self, state: &State) -> bool;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: State,
    pub action: Action,
    pub reward: f64,
    pub next_state: State,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub discounted_return: f64,
    pub gamma: f64,
    pub parameter: Vec<f64>,
}

impl Trajectory {
    /// `sum_t gamma^t r_t` recomputed from the recorded rewards.
    pub fn recompute_return(&self) -> f64 {
        let mut discount = 1.0;
        let mut total = 0.0;
        for s in &self.steps {
            total += discount * s.reward;
            discount *= self.gamma;
        }
        total
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Smallest `T` with `gamma^T r_max / (1 - gamma) <= tail_tol`, or `None`
/// when `gamma >= 1`.
pub fn truncation_horizon(gamma: f64, r_max: f64, tail_tol: f64) -> Option<usize> {
    if gamma >= 1.0 {
        return None;
    }
    if gamma <= 0.0 || r_max <= 0.0 {
        return Some(1);
    }
    let t = (tail_tol * (1.0 - gamma) / r_max).ln() / gamma.ln();
    Some(t.ceil().max(1.0) as usize)
}

/// Effective rollout length: the requested cap, the environment's own
/// horizon and the truncation horizon, whichever is smallest.
pub fn effective_horizon<E: Pmdp + ?Sized>(env: &E, horizon: usize, tail_tol: f64) -> usize {
    let mut h = horizon;
    if let Some(t) = truncation_horizon(env.gamma(), env.r_max(), tail_tol) {
        h = h.min(t);
    }
    if let Some(t) = env.max_horizon() {
        h = h.min(t);
    }
    h.max(1)
}

fn state_is_finite(s: &State) -> bool {
    match s {
        State::Discrete(_) => true,
        State::Continuous(x) => x.iter().all(|v| v.is_finite()),
    }
}

fn action_is_finite(a: &Action) -> bool {
    match a {
        Action::Discrete(_) => true,
        Action::Continuous(x) => x.iter().all(|v| v.is_finite()),
    }
}

/// Runs one episode with `p` held fixed, stopping at a terminal state or the
/// effective horizon (see [`effective_horizon`]) with the default tail
/// tolerance.
pub fn rollout<E: Pmdp + ?Sized, R: Rng + ?Sized>(
    env: &E,
    policy: &Policy,
    p: &[f64],
    horizon: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    rollout_with_tail(env, policy, p, horizon, DEFAULT_TAIL_TOL, rng)
}

pub fn rollout_with_tail<E: Pmdp + ?Sized, R: Rng + ?Sized>(
    env: &E,
    policy: &Policy,
    p: &[f64],
    horizon: usize,
    tail_tol: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    env.check_param(p)?;
    policy.check_spaces(env.state_space(), env.action_space())?;
    let gamma = env.gamma();
    let t_max = effective_horizon(env, horizon, tail_tol);

    let mut state = env.initial_state(rng);
    let mut steps = Vec::new();
    let mut total = 0.0;
    let mut discount = 1.0;
    for t in 0..t_max {
        if env.is_terminal(&state) {
            break;
        }
        let action = policy.sample_action(&state, rng)?;
        if !action_is_finite(&action) {
            return Err(Error::NumericalFailure {
                message: "non-finite action".into(),
                unit: None,
                step: Some(t),
            });
        }
        let (next, reward) = env.step(&state, &action, p, rng)?;
        if !reward.is_finite() || !state_is_finite(&next) {
            return Err(Error::NumericalFailure {
                message: "non-finite state or reward".into(),
                unit: None,
                step: Some(t),
            });
        }
        total += discount * reward;
        discount *= gamma;
        steps.push(Step {
            state,
            action,
            reward,
            next_state: next.clone(),
        });
        state = next;
    }
    Ok(Trajectory {
        steps,
        discounted_return: total,
        gamma,
        parameter: p.to_vec(),
    })
}

/// `n` independent rollouts at `p`.
pub fn collect<E: Pmdp + ?Sized, R: Rng + ?Sized>(
    env: &E,
    policy: &Policy,
    p: &[f64],
    n: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<Trajectory>> {
    (0..n).map(|_| rollout(env, policy, p, horizon, rng)).collect()
}

/// Sample mean of trajectory returns with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnEstimate {
    pub mean: f64,
    pub std_err: f64,
}

impl ReturnEstimate {
    pub fn from_returns(returns: &[f64]) -> Self {
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let std_err = if returns.len() > 1 {
            // shift by the first value so identical returns give exactly 0
            let shift = returns[0];
            let centre = returns.iter().map(|r| r - shift).sum::<f64>() / n;
            let var = returns
                .iter()
                .map(|r| (r - shift - centre) * (r - shift - centre))
                .sum::<f64>()
                / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self { mean, std_err }
    }
}

/// Monte-Carlo estimate of the expected discounted return at `p`.
pub fn estimate_return<E: Pmdp + ?Sized, R: Rng + ?Sized>(
    env: &E,
    policy: &Policy,
    p: &[f64],
    n_rollouts: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<ReturnEstimate> {
    if n_rollouts == 0 {
        return Err(Error::invalid("n_rollouts must be at least 1"));
    }
    let returns: Vec<f64> = collect(env, policy, p, n_rollouts, horizon, rng)?
        .iter()
        .map(|t| t.discounted_return)
        .collect();
    Ok(ReturnEstimate::from_returns(&returns))
}

/// Either concrete environment, for callers that pick one at run time.
#[derive(Debug, Clone, PartialEq)]
pub enum Env {
    Chain(ParamChainEnv),
    Mass(ParamMassEnv),
}

macro_rules! delegate {
    ($self:ident, $e:ident => $body:expr) => {
        match $self {
            Env::Chain($e) => $body,
            Env::Mass($e) => $body,
        }
    };
}

impl Pmdp for Env {
    fn name(&self) -> &'static str {
        delegate!(self, e => e.name())
    }
    fn param_dim(&self) -> usize {
        delegate!(self, e => e.param_dim())
    }
    fn gamma(&self) -> f64 {
        delegate!(self, e => e.gamma())
    }
    fn r_max(&self) -> f64 {
        delegate!(self, e => e.r_max())
    }
    fn state_space(&self) -> SpaceKind {
        delegate!(self, e => e.state_space())
    }
    fn action_space(&self) -> SpaceKind {
        delegate!(self, e => e.action_space())
    }
    fn max_horizon(&self) -> Option<usize> {
        delegate!(self, e => e.max_horizon())
    }
    fn check_param(&self, p: &[f64]) -> Result<()> {
        delegate!(self, e => e.check_param(p))
    }
    fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> State {
        delegate!(self, e => e.initial_state(rng))
    }
    fn step<R: Rng + ?Sized>(&self, state: &State, action: &Action, p: &[f64], rng: &mut R) -> Result<(State, f64)> {
        delegate!(self, e => e.step(state, action, p, rng))
    }
    fn is_terminal(&self, state: &State) -> bool {
        delegate!(self, e => e.is_terminal(state))
    }
}

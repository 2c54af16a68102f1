//! Stochastic policies with a flat parameter vector.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

// inherent float methods shadow these in some builds
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::env::{Action, SpaceKind, State};
use crate::error::{Error, Result};

/// Initial standard deviation of linear-Gaussian policies.
pub const INITIAL_STD: f64 = 0.5;

/// Logit gap used to encode a deterministic choice in a softmax table.
pub const DETERMINISTIC_LOGIT: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyShape {
    /// Softmax over `n_actions` logits per discrete state.
    TabularSoftmax { n_states: usize, n_actions: usize },
    /// `a ~ N(K s + bias, diag(exp(log_std))^2)`.
    LinearGaussian { state_dim: usize, action_dim: usize },
}

/// A stochastic policy. Parameters live in one flat vector `theta`:
/// logits row-major by state for tabular policies, and `[K (row-major by
/// action), bias, log_std]` for linear-Gaussian ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    shape: PolicyShape,
    theta: Vec<f64>,
}

impl Policy {
    /// Uniform tabular policy (all logits zero).
    pub fn tabular(n_states: usize, n_actions: usize) -> Self {
        Self {
            shape: PolicyShape::TabularSoftmax { n_states, n_actions },
            theta: vec![0.0; n_states * n_actions],
        }
    }

    /// Linear-Gaussian policy with zero gain and bias and std 0.5.
    pub fn linear_gaussian(state_dim: usize, action_dim: usize) -> Self {
        let mut theta = vec![0.0; action_dim * state_dim + action_dim];
        theta.extend(core::iter::repeat_n(INITIAL_STD.ln(), action_dim));
        Self {
            shape: PolicyShape::LinearGaussian { state_dim, action_dim },
            theta,
        }
    }

    /// Policy whose initial form suits the given state and action spaces.
    pub fn for_spaces(state: SpaceKind, action: SpaceKind) -> Result<Self> {
        match (state, action) {
            (SpaceKind::Discrete(s), SpaceKind::Discrete(a)) => Ok(Self::tabular(s, a)),
            (SpaceKind::Continuous(s), SpaceKind::Continuous(a)) => Ok(Self::linear_gaussian(s, a)),
            _ => Err(Error::invalid("no policy family for mixed discrete/continuous spaces")),
        }
    }

    pub fn from_parts(shape: PolicyShape, theta: Vec<f64>) -> Result<Self> {
        let expected = Self::param_count(shape);
        if theta.len() != expected {
            return Err(Error::invalid(format!(
                "policy expects {expected} parameters, got {}",
                theta.len()
            )));
        }
        if theta.iter().any(|t| t.is_nan()) {
            return Err(Error::invalid("policy parameters must not be NaN"));
        }
        if let PolicyShape::LinearGaussian { .. } = shape {
            let p = Self { shape, theta };
            if p.log_std().iter().any(|l| !l.is_finite()) {
                return Err(Error::invalid("log_std must be finite"));
            }
            return Ok(p);
        }
        Ok(Self { shape, theta })
    }

    /// Deterministic tabular policy choosing `actions[s]` in state `s`.
    pub fn deterministic_tabular(n_actions: usize, actions: &[usize]) -> Self {
        let mut p = Self::tabular(actions.len(), n_actions);
        for (s, &a) in actions.iter().enumerate() {
            for b in 0..n_actions {
                p.theta[s * n_actions + b] = if a == b { 0.0 } else { -DETERMINISTIC_LOGIT };
            }
        }
        p
    }

    fn param_count(shape: PolicyShape) -> usize {
        match shape {
            PolicyShape::TabularSoftmax { n_states, n_actions } => n_states * n_actions,
            PolicyShape::LinearGaussian { state_dim, action_dim } => action_dim * state_dim + 2 * action_dim,
        }
    }

    pub fn shape(&self) -> PolicyShape {
        self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.theta
    }

    pub fn num_params(&self) -> usize {
        self.theta.len()
    }

    /// Copy with parameters replaced; `theta` must have the same length.
    pub fn with_params(&self, theta: Vec<f64>) -> Result<Self> {
        Self::from_parts(self.shape, theta)
    }

    /// Whether the policy can act in an environment with these spaces.
    pub fn check_spaces(&self, state: SpaceKind, action: SpaceKind) -> Result<()> {
        let ok = match (self.shape, state, action) {
            (PolicyShape::TabularSoftmax { n_states, n_actions }, SpaceKind::Discrete(s), SpaceKind::Discrete(a)) => {
                n_states == s && n_actions == a
            }
            (
                PolicyShape::LinearGaussian { state_dim, action_dim },
                SpaceKind::Continuous(s),
                SpaceKind::Continuous(a),
            ) => state_dim == s && action_dim == a,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "policy {:?} does not fit state space {state:?} and action space {action:?}",
                self.shape
            )))
        }
    }

    /// Softmax action probabilities in a discrete state.
    pub fn action_probs(&self, state: usize) -> Vec<f64> {
        let PolicyShape::TabularSoftmax { n_actions, .. } = self.shape else {
            panic!("action_probs on a continuous policy");
        };
        let logits = &self.theta[state * n_actions..(state + 1) * n_actions];
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / z).collect()
    }

    fn gaussian_parts(&self) -> (usize, usize) {
        match self.shape {
            PolicyShape::LinearGaussian { state_dim, action_dim } => (state_dim, action_dim),
            PolicyShape::TabularSoftmax { .. } => panic!("gaussian accessor on a tabular policy"),
        }
    }

    pub fn gain(&self) -> &[f64] {
        let (s, a) = self.gaussian_parts();
        &self.theta[..a * s]
    }

    pub fn bias(&self) -> &[f64] {
        let (s, a) = self.gaussian_parts();
        &self.theta[a * s..a * s + a]
    }

    pub fn log_std(&self) -> &[f64] {
        let (s, a) = self.gaussian_parts();
        &self.theta[a * s + a..]
    }

    /// Mean action `K s + bias`.
    pub fn mean_action(&self, state: &[f64]) -> Vec<f64> {
        let (sd, ad) = self.gaussian_parts();
        let gain = self.gain();
        (0..ad)
            .map(|i| {
                let row = &gain[i * sd..(i + 1) * sd];
                row.iter().zip(state).map(|(k, x)| k * x).sum::<f64>() + self.bias()[i]
            })
            .collect()
    }

    fn discrete_state(&self, state: &State) -> Result<usize> {
        match (self.shape, state) {
            (PolicyShape::TabularSoftmax { n_states, .. }, State::Discrete(s)) if *s < n_states => Ok(*s),
            _ => Err(Error::invalid("state does not match a tabular policy")),
        }
    }

    fn continuous_state<'a>(&self, state: &'a State) -> Result<&'a [f64]> {
        match (self.shape, state) {
            (PolicyShape::LinearGaussian { state_dim, .. }, State::Continuous(x)) if x.len() == state_dim => Ok(x),
            _ => Err(Error::invalid("state does not match a linear-Gaussian policy")),
        }
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, state: &State, rng: &mut R) -> Result<Action> {
        match self.shape {
            PolicyShape::TabularSoftmax { .. } => {
                let probs = self.action_probs(self.discrete_state(state)?);
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (a, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return Ok(Action::Discrete(a));
                    }
                }
                let last = probs.iter().rposition(|p| *p > 0.0).unwrap_or(0);
                Ok(Action::Discrete(last))
            }
            PolicyShape::LinearGaussian { .. } => {
                let x = self.continuous_state(state)?;
                let mean = self.mean_action(x);
                let action = mean
                    .iter()
                    .zip(self.log_std())
                    .map(|(m, l)| {
                        let z: f64 = StandardNormal.sample(rng);
                        m + l.exp() * z
                    })
                    .collect();
                Ok(Action::Continuous(action))
            }
        }
    }

    /// Adds `scale * grad log pi(action | state)` into `grad`.
    pub fn accumulate_score(&self, state: &State, action: &Action, scale: f64, grad: &mut [f64]) -> Result<()> {
        match self.shape {
            PolicyShape::TabularSoftmax { n_actions, .. } => {
                let s = self.discrete_state(state)?;
                let Action::Discrete(a) = *action else {
                    return Err(Error::invalid("continuous action for a tabular policy"));
                };
                let probs = self.action_probs(s);
                for (b, p) in probs.iter().enumerate() {
                    let indicator = if a == b { 1.0 } else { 0.0 };
                    grad[s * n_actions + b] += scale * (indicator - p);
                }
            }
            PolicyShape::LinearGaussian { state_dim, action_dim } => {
                let x = self.continuous_state(state)?;
                let Action::Continuous(u) = action else {
                    return Err(Error::invalid("discrete action for a linear-Gaussian policy"));
                };
                let mean = self.mean_action(x);
                let log_std = self.log_std();
                let bias_at = action_dim * state_dim;
                let std_at = bias_at + action_dim;
                for i in 0..action_dim {
                    let var = (2.0 * log_std[i]).exp();
                    let diff = u[i] - mean[i];
                    let dmean = diff / var;
                    for j in 0..state_dim {
                        grad[i * state_dim + j] += scale * dmean * x[j];
                    }
                    grad[bias_at + i] += scale * dmean;
                    grad[std_at + i] += scale * (diff * diff / var - 1.0);
                }
            }
        }
        Ok(())
    }

    /// Adds `scale * grad H(pi(. | state))` into `grad`.
    pub fn accumulate_entropy_grad(&self, state: &State, scale: f64, grad: &mut [f64]) -> Result<()> {
        match self.shape {
            PolicyShape::TabularSoftmax { n_actions, .. } => {
                let s = self.discrete_state(state)?;
                let probs = self.action_probs(s);
                let log = |p: f64| if p > 0.0 { p.ln() } else { 0.0 };
                let entropy: f64 = -probs.iter().map(|&p| p * log(p)).sum::<f64>();
                for (b, &p) in probs.iter().enumerate() {
                    grad[s * n_actions + b] += scale * (-p * (log(p) + entropy));
                }
            }
            PolicyShape::LinearGaussian { state_dim, action_dim } => {
                self.continuous_state(state)?;
                let std_at = action_dim * state_dim + action_dim;
                for g in &mut grad[std_at..std_at + action_dim] {
                    *g += scale;
                }
            }
        }
        Ok(())
    }

    /// Log-probability of `action` in `state`.
    pub fn log_prob(&self, state: &State, action: &Action) -> Result<f64> {
        match (self.shape, action) {
            (PolicyShape::TabularSoftmax { .. }, Action::Discrete(a)) => {
                Ok(self.action_probs(self.discrete_state(state)?)[*a].ln())
            }
            (PolicyShape::LinearGaussian { .. }, Action::Continuous(u)) => {
                let mean = self.mean_action(self.continuous_state(state)?);
                let half_ln_2pi = 0.5 * (2.0 * core::f64::consts::PI).ln();
                Ok(mean
                    .iter()
                    .zip(u)
                    .zip(self.log_std())
                    .map(|((m, x), l)| {
                        let z = (x - m) / l.exp();
                        -0.5 * z * z - l - half_ln_2pi
                    })
                    .sum())
            }
            _ => Err(Error::invalid("action kind does not match the policy")),
        }
    }
}

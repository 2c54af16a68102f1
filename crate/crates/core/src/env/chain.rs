use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{effective_horizon, Action, Pmdp, SpaceKind, State, DEFAULT_TAIL_TOL};
use crate::error::{Error, Result};
use crate::linalg;
use crate::policy::{Policy, PolicyShape};

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

const RESIDUAL_TOL: f64 = 1e-10;

/// A chain of `n_states` cells whose two ends are terminal.
///
/// The agent moves one cell left or right; with probability `slip = p[0]` the
/// chosen direction is inverted. Entering the right end pays `goal_reward`,
/// entering the left end pays `left_reward` and every other move pays
/// `step_reward`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamChainEnv {
    pub n_states: usize,
    pub start: usize,
    pub gamma: f64,
    pub goal_reward: f64,
    pub left_reward: f64,
    pub step_reward: f64,
}

impl ParamChainEnv {
    /// Chain starting in the center cell with goal reward 1 and no other
    /// rewards.
    pub fn new(n_states: usize, gamma: f64) -> Result<Self> {
        let env = Self {
            n_states,
            start: n_states / 2,
            gamma,
            goal_reward: 1.0,
            left_reward: 0.0,
            step_reward: 0.0,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn with_start(mut self, start: usize) -> Result<Self> {
        self.start = start;
        self.validate()?;
        Ok(self)
    }

    pub fn with_left_reward(mut self, r: f64) -> Result<Self> {
        self.left_reward = r;
        self.validate()?;
        Ok(self)
    }

    pub fn with_step_reward(mut self, r: f64) -> Result<Self> {
        self.step_reward = r;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_states < 3 {
            return Err(Error::invalid("chain needs at least 3 states"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid(format!(
                "chain gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if self.start == 0 || self.start >= self.n_states - 1 {
            return Err(Error::invalid("chain start must be a non-terminal state"));
        }
        if [self.goal_reward, self.left_reward, self.step_reward]
            .iter()
            .any(|r| !r.is_finite())
        {
            return Err(Error::invalid("chain rewards must be finite"));
        }
        Ok(())
    }

    pub fn goal(&self) -> usize {
        self.n_states - 1
    }

    /// Interior (decision) states.
    pub fn interior(&self) -> core::ops::Range<usize> {
        1..self.n_states - 1
    }

    fn reward_for(&self, next: usize) -> f64 {
        if next == self.goal() {
            self.goal_reward
        } else if next == 0 {
            self.left_reward
        } else {
            self.step_reward
        }
    }

    /// Probability of moving right in `state` given the policy's
    /// probability of choosing Right.
    fn right_prob(prob_right: f64, slip: f64) -> f64 {
        prob_right * (1.0 - slip) + (1.0 - prob_right) * slip
    }

    fn prob_right_of(policy: &Policy, s: usize) -> f64 {
        policy.action_probs(s)[RIGHT]
    }

    fn check_tabular(&self, policy: &Policy) -> Result<()> {
        match policy.shape() {
            PolicyShape::TabularSoftmax { n_states, n_actions: 2 } if n_states == self.n_states => Ok(()),
            other => Err(Error::invalid(format!(
                "chain with {} states needs a {}x2 tabular policy, got {other:?}",
                self.n_states, self.n_states
            ))),
        }
    }
}

impl Pmdp for ParamChainEnv {
    fn name(&self) -> &'static str {
        "param_chain"
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn r_max(&self) -> f64 {
        self.goal_reward
            .abs()
            .max(self.left_reward.abs())
            .max(self.step_reward.abs())
            .max(f64::MIN_POSITIVE)
    }

    fn state_space(&self) -> SpaceKind {
        SpaceKind::Discrete(self.n_states)
    }

    fn action_space(&self) -> SpaceKind {
        SpaceKind::Discrete(2)
    }

    fn check_param(&self, p: &[f64]) -> Result<()> {
        match p {
            [slip] if (0.0..=1.0).contains(slip) => Ok(()),
            [slip] => Err(Error::invalid(format!("slip {slip} outside [0, 1]"))),
            _ => Err(Error::invalid("chain takes a one-dimensional parameter")),
        }
    }

    fn initial_state<R: Rng + ?Sized>(&self, _rng: &mut R) -> State {
        State::Discrete(self.start)
    }

    fn step<R: Rng + ?Sized>(&self, state: &State, action: &Action, p: &[f64], rng: &mut R) -> Result<(State, f64)> {
        let (&State::Discrete(s), &Action::Discrete(a)) = (state, action) else {
            return Err(Error::invalid("chain expects discrete states and actions"));
        };
        if s == 0 || s >= self.goal() || a > RIGHT {
            return Err(Error::invalid(
                "chain step from a terminal state or with an unknown action",
            ));
        }
        let slipped = rng.random::<f64>() < p[0];
        let go_right = (a == RIGHT) != slipped;
        let next = if go_right { s + 1 } else { s - 1 };
        Ok((State::Discrete(next), self.reward_for(next)))
    }

    fn is_terminal(&self, state: &State) -> bool {
        matches!(state, State::Discrete(s) if *s == 0 || *s == self.goal())
    }
}

/// Values of every chain state under a tabular policy at slip `p[0]`,
/// from the linear system `v = r_pi + gamma P_pi v` (terminal values are 0).
pub fn chain_value_function(env: &ParamChainEnv, policy: &Policy, p: &[f64]) -> Result<Vec<f64>> {
    env.check_param(p)?;
    env.check_tabular(policy)?;
    let slip = p[0];
    let n = env.n_states;
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    for s in 0..n {
        a[s * n + s] = 1.0;
    }
    for s in env.interior() {
        let right = ParamChainEnv::right_prob(ParamChainEnv::prob_right_of(policy, s), slip);
        let left = 1.0 - right;
        b[s] = right * env.reward_for(s + 1) + left * env.reward_for(s - 1);
        // terminal successors have value 0 and contribute nothing
        if s + 1 < env.goal() {
            a[s * n + s + 1] -= env.gamma * right;
        }
        if s - 1 > 0 {
            a[s * n + s - 1] -= env.gamma * left;
        }
    }
    linalg::solve(&a, &b, RESIDUAL_TOL)
}

/// Exact expected discounted return from the start state.
pub fn exact_chain_return(env: &ParamChainEnv, policy: &Policy, p: &[f64]) -> Result<f64> {
    Ok(chain_value_function(env, policy, p)?[env.start])
}

/// Exact distribution of the discounted return of a rollout capped at
/// `horizon` steps (and the default truncation horizon), as `(return,
/// probability)` atoms. Atoms with zero probability are dropped.
pub fn chain_return_distribution(
    env: &ParamChainEnv,
    policy: &Policy,
    p: &[f64],
    horizon: usize,
) -> Result<Vec<(f64, f64)>> {
    env.check_param(p)?;
    env.check_tabular(policy)?;
    let t_max = effective_horizon(env, horizon, DEFAULT_TAIL_TOL);
    let slip = p[0];
    let n = env.n_states;
    let gamma = env.gamma;
    let right: Vec<f64> = (0..n)
        .map(|s| {
            if env.interior().contains(&s) {
                ParamChainEnv::right_prob(ParamChainEnv::prob_right_of(policy, s), slip)
            } else {
                0.0
            }
        })
        .collect();

    // return accumulated before step t is the same for every surviving path:
    // step_reward * (1 + gamma + ... + gamma^{t-1})
    let mut occupancy = vec![0.0; n];
    occupancy[env.start] = 1.0;
    let mut atoms = Vec::new();
    let mut running = 0.0;
    let mut discount = 1.0;
    for _ in 0..t_max {
        let mut next = vec![0.0; n];
        for s in env.interior() {
            let m = occupancy[s];
            if m == 0.0 {
                continue;
            }
            next[s + 1] += m * right[s];
            next[s - 1] += m * (1.0 - right[s]);
        }
        if next[env.goal()] > 0.0 {
            atoms.push((running + discount * env.goal_reward, next[env.goal()]));
        }
        if next[0] > 0.0 {
            atoms.push((running + discount * env.left_reward, next[0]));
        }
        next[0] = 0.0;
        let goal = env.goal();
        next[goal] = 0.0;
        running += discount * env.step_reward;
        discount *= gamma;
        occupancy = next;
    }
    let alive: f64 = occupancy.iter().sum();
    if alive > 0.0 {
        atoms.push((running, alive));
    }
    Ok(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{estimate_return, rollout};
    use crate::rng::stream;

    fn chain5() -> ParamChainEnv {
        ParamChainEnv::new(5, 0.95).unwrap()
    }

    #[test]
    fn deterministic_right_value() {
        let v = exact_chain_return(&chain5(), &Policy::deterministic_tabular(2, &[RIGHT; 5]), &[0.0]).unwrap();
        assert!((v - 0.95).abs() < 1e-12);
    }

    #[test]
    fn zero_reward_gives_zero() {
        let mut env = chain5();
        env.goal_reward = 0.0;
        let v = exact_chain_return(&env, &Policy::tabular(5, 2), &[0.3]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn full_slip_mirrors_action() {
        let env = chain5().with_left_reward(0.4).unwrap();
        let right = Policy::deterministic_tabular(2, &[RIGHT; 5]);
        let left = Policy::deterministic_tabular(2, &[LEFT; 5]);
        let a = exact_chain_return(&env, &right, &[1.0]).unwrap();
        let b = exact_chain_return(&env, &left, &[0.0]).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!((a - 0.95 * 0.4).abs() < 1e-12);
    }

    #[test]
    fn value_solves_bellman_equation_by_iteration() {
        // oracle: plain value iteration to a fixed point
        let env = ParamChainEnv::new(7, 0.9)
            .unwrap()
            .with_start(1)
            .unwrap()
            .with_left_reward(0.5)
            .unwrap();
        let policy = Policy::from_parts(
            PolicyShape::TabularSoftmax {
                n_states: 7,
                n_actions: 2,
            },
            (0..14).map(|i| (i as f64 * 0.37).sin()).collect(),
        )
        .unwrap();
        let slip = 0.2;
        let mut v = [0.0; 7];
        for _ in 0..2000 {
            let mut nv = [0.0; 7];
            for s in 1..6 {
                let q = policy.action_probs(s)[RIGHT];
                let r = q * (1.0 - slip) + (1.0 - q) * slip;
                nv[s] =
                    r * (env.reward_for(s + 1) + 0.9 * v[s + 1]) + (1.0 - r) * (env.reward_for(s - 1) + 0.9 * v[s - 1]);
            }
            v = nv;
        }
        let exact = chain_value_function(&env, &policy, &[slip]).unwrap();
        for s in 0..7 {
            assert!((exact[s] - v[s]).abs() < 1e-12);
        }
    }

    #[test]
    fn return_distribution_matches_exact_mean() {
        let env = ParamChainEnv::new(7, 0.9)
            .unwrap()
            .with_start(2)
            .unwrap()
            .with_left_reward(0.5)
            .unwrap();
        let policy = Policy::from_parts(
            PolicyShape::TabularSoftmax {
                n_states: 7,
                n_actions: 2,
            },
            vec![0.0, 0.0, 0.2, 0.1, -0.3, 0.4, 0.0, 0.0, 0.5, -0.5, 1.0, 0.0, 0.0, 0.0],
        )
        .unwrap();
        let atoms = chain_return_distribution(&env, &policy, &[0.3], 10_000).unwrap();
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let mean: f64 = atoms.iter().map(|a| a.0 * a.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let exact = exact_chain_return(&env, &policy, &[0.3]).unwrap();
        assert!((mean - exact).abs() < 1e-6);
    }

    #[test]
    fn half_slip_makes_policy_irrelevant() {
        let env = chain5();
        let a = exact_chain_return(&env, &Policy::deterministic_tabular(2, &[RIGHT; 5]), &[0.5]).unwrap();
        let b = exact_chain_return(&env, &Policy::deterministic_tabular(2, &[LEFT; 5]), &[0.5]).unwrap();
        assert!((a - b).abs() < 1e-12);
        let est = estimate_return(
            &env,
            &Policy::deterministic_tabular(2, &[LEFT; 5]),
            &[0.5],
            4000,
            1000,
            &mut stream(9, 0, 0),
        )
        .unwrap();
        assert!((est.mean - a).abs() <= 3.0 * est.std_err);
    }

    #[test]
    fn always_right_is_monotone_in_slip() {
        let env = chain5();
        let policy = Policy::deterministic_tabular(2, &[RIGHT; 5]);
        let mut prev = f64::INFINITY;
        for i in 0..=50 {
            let v = exact_chain_return(&env, &policy, &[i as f64 * 0.01]).unwrap();
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn returns_respect_reward_bound() {
        let env = chain5().with_left_reward(-0.7).unwrap().with_step_reward(-0.1).unwrap();
        let policy = Policy::tabular(5, 2);
        let bound = env.r_max() / (1.0 - env.gamma) + DEFAULT_TAIL_TOL;
        let mut rng = stream(4, 0, 0);
        for _ in 0..500 {
            let t = rollout(&env, &policy, &[0.3], 10_000, &mut rng).unwrap();
            assert!(t.discounted_return.abs() <= bound);
            assert!((t.recompute_return() - t.discounted_return).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(ParamChainEnv::new(2, 0.9).is_err());
        assert!(ParamChainEnv::new(5, 1.0).is_err());
        assert!(ParamChainEnv::new(5, 0.9).unwrap().with_start(4).is_err());
        assert!(chain5().check_param(&[1.5]).is_err());
        assert!(exact_chain_return(&chain5(), &Policy::tabular(4, 2), &[0.1]).is_err());
    }
}

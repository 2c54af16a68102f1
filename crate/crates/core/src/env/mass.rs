use alloc::format;
use alloc::vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Action, Pmdp, SpaceKind, State};
use crate::error::{Error, Result};

/// One-dimensional point mass `x' = a x + b u + sigma xi` with reward
/// `-x^2 - c u^2`, parameterized by `p = (a, sigma)`.
///
/// Actions are clipped to `[-u_max, u_max]` and states to `[-x_max, x_max]`.
/// The noise draw is consumed on every step, also when `sigma = 0`, so runs at
/// different parameters share their random numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamMassEnv {
    pub control_gain: f64,
    pub control_cost: f64,
    pub x_max: f64,
    pub u_max: f64,
    pub x0: f64,
    pub horizon: usize,
    pub gamma: f64,
}

impl Default for ParamMassEnv {
    fn default() -> Self {
        Self {
            control_gain: 1.0,
            control_cost: 0.1,
            x_max: 5.0,
            u_max: 2.0,
            x0: 1.0,
            horizon: 50,
            gamma: 0.95,
        }
    }
}

impl ParamMassEnv {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid(format!(
                "mass gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("mass horizon must be at least 1"));
        }
        if !(self.x_max > 0.0 && self.u_max > 0.0) || self.control_cost < 0.0 {
            return Err(Error::invalid(
                "mass bounds must be positive and control cost nonnegative",
            ));
        }
        if !(self.x0.abs() <= self.x_max) || !self.control_gain.is_finite() {
            return Err(Error::invalid("initial state must lie inside [-x_max, x_max]"));
        }
        Ok(())
    }
}

impl Pmdp for ParamMassEnv {
    fn name(&self) -> &'static str {
        "param_mass"
    }

    fn param_dim(&self) -> usize {
        2
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn r_max(&self) -> f64 {
        self.x_max * self.x_max + self.control_cost * self.u_max * self.u_max
    }

    fn state_space(&self) -> SpaceKind {
        SpaceKind::Continuous(1)
    }

    fn action_space(&self) -> SpaceKind {
        SpaceKind::Continuous(1)
    }

    fn max_horizon(&self) -> Option<usize> {
        Some(self.horizon)
    }

    fn check_param(&self, p: &[f64]) -> Result<()> {
        match p {
            [a, sigma] if a.is_finite() && sigma.is_finite() && *sigma >= 0.0 => Ok(()),
            [_, _] => Err(Error::invalid("mass parameters must be finite with sigma >= 0")),
            _ => Err(Error::invalid("mass takes a two-dimensional parameter (a, sigma)")),
        }
    }

    fn initial_state<R: Rng + ?Sized>(&self, _rng: &mut R) -> State {
        State::Continuous(vec![self.x0])
    }

    fn step<R: Rng + ?Sized>(&self, state: &State, action: &Action, p: &[f64], rng: &mut R) -> Result<(State, f64)> {
        let (State::Continuous(x), Action::Continuous(u)) = (state, action) else {
            return Err(Error::invalid("mass expects continuous states and actions"));
        };
        let x = x[0];
        let u = u[0].clamp(-self.u_max, self.u_max);
        let xi: f64 = StandardNormal.sample(rng);
        let reward = -x * x - self.control_cost * u * u;
        let next = (p[0] * x + self.control_gain * u + p[1] * xi).clamp(-self.x_max, self.x_max);
        Ok((State::Continuous(vec![next]), reward))
    }

    fn is_terminal(&self, _state: &State) -> bool {
        false
    }
}

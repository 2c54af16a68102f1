//! Experiment configuration file (JSON).
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "env": {"env": "param_chain", "n_states": 7, "gamma": 0.9, "start": 1, "left_reward": 0.5},
//!   "distribution": {"kind": "empirical", "bounds": [[0.0, 0.5]], "points": [[0.05], [0.45]], "weights": [0.5, 0.5]},
//!   "preference": {"kind": "power", "k": 21},
//!   "mode": "db",
//!   "metric": {"delta": 0.1, "n_rollouts_per_block": 32},
//!   "trainer": {"max_iterations": 500, "learning_rate": 3.0, "baseline": "mean_return", "entropy_bonus": 0.01},
//!   "seeds": [0, 1, 2],
//!   "output_dir": "runs/k21"
//! }
//! ```
//!
//! Unknown keys anywhere are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uorrl_core::env::{Env, ParamChainEnv, ParamMassEnv, Pmdp};
use uorrl_core::metric::{suggest_cluster_sizes, suggest_delta, DbMetricConfig, DfSizing, DEFAULT_HORIZON};
use uorrl_core::space::{ParamProcess, ParamSource};
use uorrl_core::trainer::{default_learning_rate, Baseline, MetricSetup, TrainConfig};
use uorrl_core::{MetricMode, ParamDistribution, ParameterSpace, Policy, PreferenceSpec};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub env: EnvConfig,
    pub distribution: DistributionConfig,
    pub preference: PreferenceConfig,
    pub mode: ModeConfig,
    #[serde(default)]
    pub metric: MetricConfig,
    #[serde(default)]
    pub trainer: TrainerConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub eval: EvalConfig,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvConfig {
    ParamChain {
        n_states: usize,
        #[serde(default = "default_chain_gamma")]
        gamma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        goal_reward: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        left_reward: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step_reward: Option<f64>,
    },
    ParamMass {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        control_gain: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        control_cost: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x_max: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        u_max: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<f64>,
    },
}

fn default_chain_gamma() -> f64 {
    0.95
}

impl EnvConfig {
    pub fn build(&self) -> CliResult<Env> {
        match self {
            EnvConfig::ParamChain {
                n_states,
                gamma,
                start,
                goal_reward,
                left_reward,
                step_reward,
            } => {
                let mut env = ParamChainEnv::new(*n_states, *gamma)?;
                if let Some(s) = start {
                    env = env.with_start(*s)?;
                }
                if let Some(r) = goal_reward {
                    env.goal_reward = *r;
                }
                if let Some(r) = left_reward {
                    env = env.with_left_reward(*r)?;
                }
                if let Some(r) = step_reward {
                    env = env.with_step_reward(*r)?;
                }
                env.validate()?;
                Ok(Env::Chain(env))
            }
            EnvConfig::ParamMass {
                gamma,
                horizon,
                control_gain,
                control_cost,
                x_max,
                u_max,
                x0,
            } => {
                let d = ParamMassEnv::default();
                let env = ParamMassEnv {
                    control_gain: control_gain.unwrap_or(d.control_gain),
                    control_cost: control_cost.unwrap_or(d.control_cost),
                    x_max: x_max.unwrap_or(d.x_max),
                    u_max: u_max.unwrap_or(d.u_max),
                    x0: x0.unwrap_or(d.x0),
                    horizon: horizon.unwrap_or(d.horizon),
                    gamma: gamma.unwrap_or(d.gamma),
                };
                env.validate()?;
                Ok(Env::Mass(env))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionConfig {
    pub kind: DistributionKindName,
    /// Per-axis `[lower, upper]`; required at the top level, inherited by
    /// mixture components.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<DistributionConfig>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKindName {
    Uniform,
    TruncatedGaussian,
    Empirical,
    Mixture,
}

fn required<'a, T>(field: &'a Option<T>, kind: &str, name: &str) -> CliResult<&'a T> {
    field
        .as_ref()
        .ok_or_else(|| CliError::config(format!("{kind} distribution needs `{name}`")))
}

impl DistributionConfig {
    pub fn space(&self) -> CliResult<ParameterSpace> {
        let bounds = self
            .bounds
            .as_ref()
            .ok_or_else(|| CliError::config("distribution needs `bounds`"))?;
        if bounds.is_empty() {
            return Err(CliError::config("distribution `bounds` must list at least one axis"));
        }
        let lower = bounds.iter().map(|b| b[0]).collect();
        let upper = bounds.iter().map(|b| b[1]).collect();
        Ok(ParameterSpace::new(lower, upper)?)
    }

    pub fn build(&self) -> CliResult<ParamDistribution> {
        let space = self.space()?;
        self.build_in(&space)
    }

    fn build_in(&self, inherited: &ParameterSpace) -> CliResult<ParamDistribution> {
        let space = match &self.bounds {
            Some(_) => self.space()?,
            None => inherited.clone(),
        };
        let check_unused = |present: bool, name: &str, kind: &str| {
            if present {
                Err(CliError::config(format!(
                    "`{name}` is not used by a {kind} distribution"
                )))
            } else {
                Ok(())
            }
        };
        match self.kind {
            DistributionKindName::Uniform => {
                check_unused(
                    self.mean.is_some()
                        || self.std.is_some()
                        || self.points.is_some()
                        || self.weights.is_some()
                        || self.components.is_some(),
                    "mean/std/points/weights/components",
                    "uniform",
                )?;
                Ok(ParamDistribution::uniform(space))
            }
            DistributionKindName::TruncatedGaussian => {
                check_unused(
                    self.points.is_some() || self.weights.is_some() || self.components.is_some(),
                    "points/weights/components",
                    "truncated_gaussian",
                )?;
                let mean = required(&self.mean, "truncated_gaussian", "mean")?.clone();
                let std = required(&self.std, "truncated_gaussian", "std")?.clone();
                Ok(ParamDistribution::truncated_gaussian(space, mean, std)?)
            }
            DistributionKindName::Empirical => {
                check_unused(
                    self.mean.is_some() || self.std.is_some() || self.components.is_some(),
                    "mean/std/components",
                    "empirical",
                )?;
                let points = required(&self.points, "empirical", "points")?.clone();
                let weights = match &self.weights {
                    Some(w) => w.clone(),
                    None => vec![1.0 / points.len().max(1) as f64; points.len()],
                };
                Ok(ParamDistribution::empirical(space, points, weights)?)
            }
            DistributionKindName::Mixture => {
                check_unused(
                    self.mean.is_some() || self.std.is_some() || self.points.is_some(),
                    "mean/std/points",
                    "mixture",
                )?;
                let components = required(&self.components, "mixture", "components")?
                    .iter()
                    .map(|c| c.build_in(&space))
                    .collect::<CliResult<Vec<_>>>()?;
                let weights = required(&self.weights, "mixture", "weights")?.clone();
                Ok(ParamDistribution::mixture(components, weights)?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PreferenceConfig {
    Power {
        k: f64,
    },
    /// The worst-case limit `k -> inf`.
    Dirac,
    Table {
        knots: Vec<[f64; 2]>,
    },
}

impl PreferenceConfig {
    pub fn build(&self) -> CliResult<PreferenceSpec> {
        Ok(match self {
            PreferenceConfig::Power { k } => PreferenceSpec::power(*k)?,
            PreferenceConfig::Dirac => PreferenceSpec::dirac(),
            PreferenceConfig::Table { knots } => {
                let pairs: Vec<(f64, f64)> = knots.iter().map(|k| (k[0], k[1])).collect();
                PreferenceSpec::tabulated(&pairs)?
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    Db,
    Df,
}

impl From<ModeConfig> for MetricMode {
    fn from(m: ModeConfig) -> Self {
        match m {
            ModeConfig::Db => MetricMode::Db,
            ModeConfig::Df => MetricMode::Df,
        }
    }
}

/// Metric sizing. DB uses `delta`, or `epsilon * delta_scale`. DF uses
/// `n1`/`n2`, or the sizes suggested from `epsilon`/`rho` with `c1`/`c2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default = "default_rollouts_per_block")]
    pub n_rollouts_per_block: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default = "one")]
    pub c1: f64,
    #[serde(default = "one")]
    pub c2: f64,
    #[serde(default = "one")]
    pub delta_scale: f64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub param_source: ParamSourceConfig,
    /// Pool DF cluster returns across iterations instead of rebuilding.
    #[serde(default)]
    pub accumulate: bool,
}

fn default_rollouts_per_block() -> usize {
    uorrl_core::metric::DEFAULT_ROLLOUTS_PER_BLOCK
}

fn one() -> f64 {
    1.0
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            delta: None,
            n_rollouts_per_block: default_rollouts_per_block(),
            n1: None,
            n2: None,
            epsilon: None,
            rho: None,
            c1: 1.0,
            c2: 1.0,
            delta_scale: 1.0,
            horizon: DEFAULT_HORIZON,
            param_source: ParamSourceConfig::Iid,
            accumulate: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamSourceConfig {
    #[default]
    Iid,
    Drift {
        step_bound: f64,
    },
}

impl From<ParamSourceConfig> for ParamSource {
    fn from(s: ParamSourceConfig) -> Self {
        match s {
            ParamSourceConfig::Iid => ParamSource::Iid,
            ParamSourceConfig::Drift { step_bound } => ParamSource::Drift { step_bound },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerConfig {
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    /// Defaults to 0.05 for tabular and 0.005 for linear-Gaussian policies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub entropy_bonus: f64,
}

fn default_iterations() -> usize {
    100
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            max_iterations: default_iterations(),
            learning_rate: None,
            baseline: BaselineConfig::None,
            entropy_bonus: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineConfig {
    #[default]
    None,
    MeanReturn,
}

impl From<BaselineConfig> for Baseline {
    fn from(b: BaselineConfig) -> Self {
        match b {
            BaselineConfig::None => Baseline::None,
            BaselineConfig::MeanReturn => Baseline::MeanReturn,
        }
    }
}

/// Settings for `eval` and `art-diff`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Sub-ranges per axis of the heat map; empty means 10 per axis.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<usize>,
    #[serde(default = "default_rollouts_per_cell")]
    pub rollouts_per_cell: usize,
    /// Trajectories per policy, parameters drawn from the distribution.
    #[serde(default = "default_trajectories")]
    pub n_trajectories: usize,
    /// Robustness degrees reported in the summary.
    #[serde(default = "default_eval_k")]
    pub k: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_rollouts_per_cell() -> usize {
    20
}

fn default_trajectories() -> usize {
    1000
}

fn default_eval_k() -> Vec<f64> {
    vec![0.0, 1.0]
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            grid: Vec::new(),
            rollouts_per_cell: default_rollouts_per_cell(),
            n_trajectories: default_trajectories(),
            k: default_eval_k(),
            seed: 0,
        }
    }
}

/// Everything a run needs, built and cross-checked from a config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub env: Env,
    pub distribution: ParamDistribution,
    pub preference: PreferenceSpec,
    pub metric: MetricSetup,
    pub train: TrainConfig,
}

/// Metric sizing after applying the suggestion helpers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sizing {
    Db {
        delta: f64,
        blocks: usize,
        n_rollouts_per_block: usize,
    },
    Df {
        n1: usize,
        n2: usize,
    },
}

impl ExperimentConfig {
    pub fn from_str(text: &str, path: &Path) -> CliResult<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_str(&text, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn sizing(&self, distribution: &ParamDistribution) -> CliResult<Sizing> {
        let m = &self.metric;
        match self.mode {
            ModeConfig::Db => {
                let delta = match (m.delta, m.epsilon) {
                    (Some(d), _) => d,
                    (None, Some(eps)) => suggest_delta(eps, m.delta_scale)?,
                    (None, None) => return Err(CliError::config("db mode needs `metric.delta` or `metric.epsilon`")),
                };
                let blocks = uorrl_core::space::set_division(distribution.space(), delta)?.len();
                Ok(Sizing::Db {
                    delta,
                    blocks,
                    n_rollouts_per_block: m.n_rollouts_per_block,
                })
            }
            ModeConfig::Df => match (m.n1, m.n2, m.epsilon, m.rho) {
                (Some(n1), Some(n2), _, _) => Ok(Sizing::Df { n1, n2 }),
                (None, None, Some(eps), Some(rho)) => {
                    let (n1, n2) = suggest_cluster_sizes(eps, rho, distribution.space().dims(), m.c1, m.c2)?;
                    Ok(Sizing::Df { n1, n2 })
                }
                _ => Err(CliError::config(
                    "df mode needs both `metric.n1` and `metric.n2`, or `metric.epsilon` and `metric.rho`",
                )),
            },
        }
    }

    /// Builds every component and checks they fit together, without running
    /// any rollout.
    pub fn resolve(&self, seed: u64) -> CliResult<Resolved> {
        let env = self.env.build()?;
        let distribution = self.distribution.build()?;
        if distribution.space().dims() != env.param_dim() {
            return Err(CliError::config(format!(
                "distribution has {} axes but {} takes a {}-dimensional parameter",
                distribution.space().dims(),
                env.name(),
                env.param_dim()
            )));
        }
        // the whole parameter box must be valid for the environment
        env.check_param(distribution.space().lower())?;
        env.check_param(distribution.space().upper())?;
        let preference = self.preference.build()?;

        let metric = match self.sizing(&distribution)? {
            Sizing::Db {
                delta,
                n_rollouts_per_block,
                ..
            } => MetricSetup::Db(
                DbMetricConfig::from_distribution(&distribution, delta, n_rollouts_per_block)?
                    .with_horizon(self.metric.horizon),
            ),
            Sizing::Df { n1, n2 } => {
                let mut sizing = DfSizing::new(n1, n2)?;
                sizing.horizon = self.metric.horizon;
                MetricSetup::Df {
                    sizing,
                    process: ParamProcess::new(distribution.clone(), self.metric.param_source.into()),
                    accumulate: self.metric.accumulate,
                }
            }
        };
        if self.metric.horizon == 0 {
            return Err(CliError::config("metric.horizon must be at least 1"));
        }

        let initial = Policy::for_spaces(env.state_space(), env.action_space())?;
        let t = &self.trainer;
        let train = TrainConfig {
            metric: metric.clone(),
            max_iterations: t.max_iterations,
            learning_rate: t.learning_rate.unwrap_or_else(|| default_learning_rate(&initial)),
            preference: preference.clone(),
            seed,
            baseline: t.baseline.into(),
            entropy_bonus: t.entropy_bonus,
            initial_policy: Some(initial),
        };
        train.validate()?;
        if self.seeds.is_empty() {
            return Err(CliError::config("`seeds` must list at least one seed"));
        }
        Ok(Resolved {
            env,
            distribution,
            preference,
            metric,
            train,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHAIN: &str = r#"{
        "schema_version": 1,
        "env": {"env": "param_chain", "n_states": 7, "gamma": 0.9, "start": 1, "left_reward": 0.5},
        "distribution": {"kind": "empirical", "bounds": [[0.0, 0.5]], "points": [[0.05], [0.45]], "weights": [0.5, 0.5]},
        "preference": {"kind": "power", "k": 21},
        "mode": "db",
        "metric": {"delta": 0.1, "n_rollouts_per_block": 4},
        "trainer": {"max_iterations": 3, "learning_rate": 3.0, "baseline": "mean_return"},
        "seeds": [1, 2]
    }"#;

    fn parse(text: &str) -> CliResult<ExperimentConfig> {
        ExperimentConfig::from_str(text, Path::new("test.json"))
    }

    #[test]
    fn round_trip() {
        let cfg = parse(CHAIN).unwrap();
        let again = parse(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
        let r = cfg.resolve(1).unwrap();
        let MetricSetup::Db(db) = &r.metric else { panic!() };
        assert_eq!(db.blocks().len(), 5);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = CHAIN.replace("\"mode\": \"db\"", "\"mode\": \"db\", \"moed\": 1");
        assert!(matches!(parse(&bad), Err(CliError::Json { .. })));
        let bad = CHAIN.replace("\"k\": 21", "\"k\": 21, \"kk\": 2");
        assert!(parse(&bad).is_err());
        let bad = CHAIN.replace("\"gamma\": 0.9", "\"gamma\": 0.9, \"slip\": 0.1");
        assert!(parse(&bad).is_err());
    }

    #[test]
    fn schema_version_checked() {
        let bad = CHAIN.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(parse(&bad), Err(CliError::Config(_))));
    }

    #[test]
    fn df_sizing_from_epsilon() {
        let text = CHAIN
            .replace("\"mode\": \"db\"", "\"mode\": \"df\"")
            .replace("\"delta\": 0.1, ", "\"epsilon\": 0.5, \"rho\": 0.36787944117144233, ");
        let cfg = parse(&text).unwrap();
        let dist = cfg.distribution.build().unwrap();
        assert_eq!(cfg.sizing(&dist).unwrap(), Sizing::Df { n1: 4, n2: 16 });
    }

    #[test]
    fn mismatched_dims_rejected() {
        let text = CHAIN.replace("[[0.0, 0.5]]", "[[0.0, 0.5], [0.0, 1.0]]");
        let cfg = parse(&text).unwrap();
        assert!(cfg.resolve(0).is_err());
        let text = CHAIN.replace("[[0.0, 0.5]]", "[[0.0, 1.5]]");
        assert!(parse(&text).unwrap().resolve(0).is_err());
    }
}

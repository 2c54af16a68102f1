//! Weighted policy-gradient training against the UOR metric.
//!
//! Each iteration collects per-block (DB) or per-cluster (DF) trajectories,
//! ranks the units, and takes one ascent step on `sum_j w_j J_j` with the
//! weights frozen at their current values.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use crate::env::{exact_chain_return, ParamChainEnv, Pmdp, Trajectory};
use crate::error::{Error, Result};
use crate::metric::{
    db_metric_batches, df_metric_clusters, df_metric_from_means, DbMetricConfig, DfSizing, MetricMode, MetricReport,
};
use crate::policy::{Policy, PolicyShape};
use crate::preference::{exact_metric, PreferenceSpec};
use crate::rng::stream;
use crate::space::ParamProcess;

pub const DEFAULT_TABULAR_LR: f64 = 0.05;
pub const DEFAULT_GAUSSIAN_LR: f64 = 0.005;

/// Largest number of deterministic policies [`enumerate_optimal_tabular`]
/// will visit.
pub const MAX_ENUMERATED_POLICIES: usize = 1_000_000;

const TRAIN_TAG: u64 = 0x7a1e;

/// Trajectories of one block or cluster with its frozen metric weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedBatch {
    pub id: usize,
    pub weight: f64,
    pub trajectories: Vec<Trajectory>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Baseline {
    #[default]
    None,
    /// Subtracts the batch's mean discounted return.
    MeanReturn,
}

pub fn default_learning_rate(policy: &Policy) -> f64 {
    match policy.shape() {
        PolicyShape::TabularSoftmax { .. } => DEFAULT_TABULAR_LR,
        PolicyShape::LinearGaussian { .. } => DEFAULT_GAUSSIAN_LR,
    }
}

fn check_weights(batches: &[WeightedBatch]) -> Result<()> {
    if batches.iter().any(|b| !(b.weight >= 0.0 && b.weight.is_finite())) {
        return Err(Error::invalid("batch weights must be finite and nonnegative"));
    }
    let total: f64 = batches.iter().map(|b| b.weight).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("batch weights sum to {total}, expected 1")));
    }
    Ok(())
}

/// Score-function gradient of one batch's mean return, using reward-to-go:
/// `(1/n) sum_traj sum_t gamma^t (G_t - b) grad log pi(a_t | s_t)`, plus
/// `entropy_bonus * (1/n) sum_traj sum_t grad H(pi(. | s_t))`.
pub fn batch_gradient(
    policy: &Policy,
    trajectories: &[Trajectory],
    baseline: Baseline,
    entropy_bonus: f64,
) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; policy.num_params()];
    if trajectories.is_empty() {
        return Ok(grad);
    }
    let n = trajectories.len() as f64;
    let b = match baseline {
        Baseline::None => 0.0,
        Baseline::MeanReturn => trajectories.iter().map(|t| t.discounted_return).sum::<f64>() / n,
    };
    let mut to_go = Vec::new();
    for traj in trajectories {
        to_go.clear();
        to_go.resize(traj.steps.len(), 0.0);
        let mut g = 0.0;
        for (t, step) in traj.steps.iter().enumerate().rev() {
            g = step.reward + traj.gamma * g;
            to_go[t] = g;
        }
        let mut discount = 1.0;
        for (t, step) in traj.steps.iter().enumerate() {
            policy.accumulate_score(&step.state, &step.action, discount * (to_go[t] - b) / n, &mut grad)?;
            if entropy_bonus != 0.0 {
                policy.accumulate_entropy_grad(&step.state, entropy_bonus / n, &mut grad)?;
            }
            discount *= traj.gamma;
        }
    }
    Ok(grad)
}

/// Gradient of the weighted surrogate `sum_j w_j J_j` with the weights held
/// constant.
pub fn surrogate_gradient(
    policy: &Policy,
    batches: &[WeightedBatch],
    baseline: Baseline,
    entropy_bonus: f64,
) -> Result<Vec<f64>> {
    check_weights(batches)?;
    if !(entropy_bonus >= 0.0 && entropy_bonus.is_finite()) {
        return Err(Error::invalid("entropy bonus must be finite and nonnegative"));
    }
    let mut grad = vec![0.0; policy.num_params()];
    for batch in batches {
        if batch.weight == 0.0 {
            continue;
        }
        let g = batch_gradient(policy, &batch.trajectories, baseline, entropy_bonus)?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure {
                message: "non-finite policy gradient".into(),
                unit: Some(batch.id),
                step: None,
            });
        }
        for (acc, v) in grad.iter_mut().zip(&g) {
            *acc += batch.weight * v;
        }
    }
    Ok(grad)
}

/// One ascent step of size `learning_rate` on the weighted surrogate.
pub fn policy_update(
    policy: &Policy,
    batches: &[WeightedBatch],
    learning_rate: f64,
    baseline: Baseline,
    entropy_bonus: f64,
) -> Result<Policy> {
    if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
        return Err(Error::invalid("learning rate must be finite and nonnegative"));
    }
    let grad = surrogate_gradient(policy, batches, baseline, entropy_bonus)?;
    let theta: Vec<f64> = policy
        .params()
        .iter()
        .zip(&grad)
        .map(|(p, g)| p + learning_rate * g)
        .collect();
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("policy parameters became non-finite"));
    }
    policy.with_params(theta)
}

/// How each iteration builds its units.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricSetup {
    Db(DbMetricConfig),
    Df {
        sizing: DfSizing,
        process: ParamProcess,
        /// Keep pooling returns into the same clusters across iterations
        /// instead of rebuilding them; the gradient still uses only the
        /// current iteration's trajectories.
        accumulate: bool,
    },
}

impl MetricSetup {
    pub fn mode(&self) -> MetricMode {
        match self {
            MetricSetup::Db(_) => MetricMode::Db,
            MetricSetup::Df { .. } => MetricMode::Df,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub metric: MetricSetup,
    pub max_iterations: usize,
    pub learning_rate: f64,
    pub preference: PreferenceSpec,
    pub seed: u64,
    pub baseline: Baseline,
    pub entropy_bonus: f64,
    /// Starting policy; defaults to the zero-initialized policy for the env.
    pub initial_policy: Option<Policy>,
}

impl TrainConfig {
    pub fn new(metric: MetricSetup, preference: PreferenceSpec, seed: u64) -> Self {
        Self {
            metric,
            max_iterations: 100,
            learning_rate: DEFAULT_TABULAR_LR,
            preference,
            seed,
            baseline: Baseline::None,
            entropy_bonus: 0.0,
            initial_policy: None,
        }
    }

    pub fn mode(&self) -> MetricMode {
        self.metric.mode()
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be finite and nonnegative"));
        }
        if !(self.entropy_bonus >= 0.0 && self.entropy_bonus.is_finite()) {
            return Err(Error::invalid("entropy_bonus must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Result of [`train`]. On a numerical failure, `failure` is set and
/// `history` holds the iterations completed before it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub policy: Policy,
    pub history: Vec<MetricReport>,
    pub failure: Option<Error>,
}

/// Runs the training loop; see [`train_with`].
pub fn train<E: Pmdp + Sync>(env: &E, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(env, cfg, |_, _| {})
}

/// Runs `cfg.max_iterations` iterations, calling `on_iteration(i, report)`
/// after each metric evaluation. Iteration `i` draws all randomness from a
/// stream keyed by `(cfg.seed, i)`.
///
/// Invalid configurations return `Err` before any rollout. Numerical
/// failures during training stop the loop and are reported in
/// [`TrainOutcome::failure`].
pub fn train_with<E, F>(env: &E, cfg: &TrainConfig, mut on_iteration: F) -> Result<TrainOutcome>
where
    E: Pmdp + Sync,
    F: FnMut(usize, &MetricReport),
{
    cfg.validate()?;
    let mut policy = match &cfg.initial_policy {
        Some(p) => p.clone(),
        None => Policy::for_spaces(env.state_space(), env.action_space())?,
    };
    policy.check_spaces(env.state_space(), env.action_space())?;

    let mut metric = cfg.metric.clone();
    let mut pooled: Vec<(f64, usize)> = Vec::new();
    let mut history = Vec::with_capacity(cfg.max_iterations);

    for i in 0..cfg.max_iterations {
        let seed = stream(cfg.seed, TRAIN_TAG, i as u64).next_u64();
        let step = iterate(env, &policy, cfg, &mut metric, &mut pooled, seed);
        let (report, batches) = match step {
            Ok(v) => v,
            Err(e @ Error::NumericalFailure { .. }) => return Ok(stopped(policy, history, e)),
            Err(e) => return Err(e),
        };
        on_iteration(i, &report);
        let updated = policy_update(&policy, &batches, cfg.learning_rate, cfg.baseline, cfg.entropy_bonus);
        history.push(report);
        match updated {
            Ok(p) => policy = p,
            Err(e @ Error::NumericalFailure { .. }) => return Ok(stopped(policy, history, e)),
            Err(e) => return Err(e),
        }
    }
    Ok(TrainOutcome {
        policy,
        history,
        failure: None,
    })
}

fn stopped(policy: Policy, history: Vec<MetricReport>, e: Error) -> TrainOutcome {
    TrainOutcome {
        policy,
        history,
        failure: Some(e),
    }
}

fn iterate<E: Pmdp + Sync>(
    env: &E,
    policy: &Policy,
    cfg: &TrainConfig,
    metric: &mut MetricSetup,
    pooled: &mut Vec<(f64, usize)>,
    seed: u64,
) -> Result<(MetricReport, Vec<WeightedBatch>)> {
    match metric {
        MetricSetup::Db(db) => {
            let (report, units) = db_metric_batches(env, policy, db, &cfg.preference, seed)?;
            Ok((
                report.clone(),
                weighted(&report, units.into_iter().map(|u| (u.id, u.trajectories))),
            ))
        }
        MetricSetup::Df {
            sizing,
            process,
            accumulate,
        } => {
            let (fresh, clusters) = df_metric_clusters(env, policy, *sizing, process, &cfg.preference, seed)?;
            let report = if *accumulate {
                pooled.resize(clusters.len(), (0.0, 0));
                for c in &clusters {
                    let slot = &mut pooled[c.id];
                    slot.0 += c.trajectories.iter().map(|t| t.discounted_return).sum::<f64>();
                    slot.1 += c.trajectories.len();
                }
                let means: Vec<f64> = pooled.iter().map(|(s, n)| s / *n as f64).collect();
                df_metric_from_means(&means, &cfg.preference)?
            } else {
                fresh
            };
            Ok((
                report.clone(),
                weighted(&report, clusters.into_iter().map(|c| (c.id, c.trajectories))),
            ))
        }
    }
}

fn weighted(report: &MetricReport, units: impl Iterator<Item = (usize, Vec<Trajectory>)>) -> Vec<WeightedBatch> {
    let weights = report.weights_by_unit();
    units
        .map(|(id, trajectories)| WeightedBatch {
            id,
            weight: weights[id],
            trajectories,
        })
        .collect()
}

/// Exact metric of a tabular chain policy over a finite parameter grid.
pub fn exact_grid_metric(
    env: &ParamChainEnv,
    policy: &Policy,
    grid: &[Vec<f64>],
    masses: &[f64],
    pref: &PreferenceSpec,
) -> Result<f64> {
    if grid.len() != masses.len() || grid.is_empty() {
        return Err(Error::invalid("grid and masses must be nonempty and of equal length"));
    }
    let pairs = grid
        .iter()
        .zip(masses)
        .map(|(p, &m)| Ok((exact_chain_return(env, policy, p)?, m)))
        .collect::<Result<Vec<_>>>()?;
    Ok(exact_metric(&pairs, pref)?.0)
}

/// Visits every deterministic tabular policy on the chain's interior states
/// and returns the one with the largest exact metric (first found on ties).
///
/// Policies are enumerated in binary order with state `1` as the most
/// significant digit and `0 = LEFT`.
pub fn enumerate_optimal_tabular(
    env: &ParamChainEnv,
    grid: &[Vec<f64>],
    masses: &[f64],
    pref: &PreferenceSpec,
) -> Result<(Policy, f64)> {
    env.validate()?;
    let interior: Vec<usize> = env.interior().collect();
    let count = 1usize
        .checked_shl(interior.len() as u32)
        .filter(|c| *c <= MAX_ENUMERATED_POLICIES)
        .ok_or_else(|| {
            Error::Capacity(format!(
                "2^{} deterministic policies exceed the enumeration limit of {MAX_ENUMERATED_POLICIES}",
                interior.len()
            ))
        })?;

    let mut best: Option<(Policy, f64)> = None;
    let mut actions = vec![crate::env::RIGHT; env.n_states];
    for code in 0..count {
        for (bit, &s) in interior.iter().enumerate() {
            actions[s] = (code >> (interior.len() - 1 - bit)) & 1;
        }
        let policy = Policy::deterministic_tabular(2, &actions);
        let value = exact_grid_metric(env, &policy, grid, masses, pref)?;
        if best.as_ref().is_none_or(|(_, v)| value > *v) {
            best = Some((policy, value));
        }
    }
    Ok(best.expect("at least one policy is enumerated"))
}

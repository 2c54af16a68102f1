use std::path::{Path, PathBuf};

use rayon::prelude::*;
use uorrl_core::env::{collect, Env};
use uorrl_core::preference::equal_mass_metric;
use uorrl_core::rng::stream;
use uorrl_core::{Policy, PreferenceSpec};

use super::{load_policies, mean_std, sample_returns, worst_decile_mean};
use crate::artifacts::{header, write_csv};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

const CELL_TAG: u64 = 0xce11;

/// One heat-map cell: mean return over the rollouts at the cell center, and
/// the configured preference's metric over those same returns.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: Vec<usize>,
    pub center: Vec<f64>,
    pub value: f64,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEval {
    pub name: String,
    pub cells: Vec<Cell>,
    pub returns: Vec<f64>,
    /// Metric of the trajectory returns at each requested `k`.
    pub metrics: Vec<f64>,
    pub average_return: f64,
    pub worst10_return: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRun {
    pub ks: Vec<f64>,
    pub policies: Vec<PolicyEval>,
}

/// Parses `AxB` (or a single `A` for one axis).
pub fn parse_grid(spec: &str) -> CliResult<Vec<usize>> {
    spec.split(['x', 'X'])
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| CliError::config(format!("bad grid spec `{spec}`: expected e.g. 10x10")))
        })
        .collect()
}

/// Parses a comma-separated list of robustness degrees.
pub fn parse_k_list(spec: &str) -> CliResult<Vec<f64>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|k| *k >= 0.0)
                .ok_or_else(|| CliError::config(format!("bad k list `{spec}`")))
        })
        .collect()
}

/// Evaluates each policy on a heat-map grid over the parameter space and on
/// `eval.n_trajectories` trajectories with parameters drawn from the
/// distribution.
///
/// Writes `heatmap_<policy>.csv` per policy, `trajectories.csv` (one row per
/// trajectory) and `summary.csv` (metric at each `k`, average return and
/// worst-10% return, with the mean and std across policies).
pub fn cmd_eval(
    cfg: &ExperimentConfig,
    policy_paths: &[PathBuf],
    grid: Option<&[usize]>,
    ks: Option<&[f64]>,
    out: &Path,
) -> CliResult<EvalRun> {
    if policy_paths.is_empty() {
        return Err(CliError::config("eval needs at least one policy file"));
    }
    let r = cfg.resolve(cfg.eval.seed)?;
    let dims = r.distribution.space().dims();
    let grid: Vec<usize> = match grid {
        Some(g) => g.to_vec(),
        None if cfg.eval.grid.is_empty() => vec![10; dims],
        None => cfg.eval.grid.clone(),
    };
    if grid.len() != dims || dims > 2 || grid.contains(&0) {
        return Err(CliError::config(format!(
            "heat-map grid {grid:?} must give a positive count for each of the {dims} axes (1 or 2 axes supported)"
        )));
    }
    let ks: Vec<f64> = ks.map(<[f64]>::to_vec).unwrap_or_else(|| cfg.eval.k.clone());
    let prefs = ks
        .iter()
        .map(|&k| PreferenceSpec::power(k))
        .collect::<Result<Vec<_>, _>>()?;
    let m = cfg.eval.rollouts_per_cell;
    let n = cfg.eval.n_trajectories;
    if m == 0 || n == 0 {
        return Err(CliError::config(
            "eval.rollouts_per_cell and eval.n_trajectories must be positive",
        ));
    }
    let policies = load_policies(&r.env, policy_paths)?;
    let horizon = cfg.metric.horizon;

    let mut evals = Vec::with_capacity(policies.len());
    for (name, policy) in &policies {
        let cells = heat_map(
            &r.env,
            policy,
            &r.distribution,
            &grid,
            m,
            horizon,
            &r.preference,
            cfg.eval.seed,
        )?;
        let samples = sample_returns(&r.env, policy, &r.distribution, n, horizon, cfg.eval.seed)?;
        let returns: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let metrics = prefs
            .iter()
            .map(|p| Ok(equal_mass_metric(&returns, p)?.0))
            .collect::<CliResult<Vec<_>>>()?;
        write_heat_map(&out.join(format!("heatmap_{name}.csv")), &cells, dims)?;
        evals.push((
            samples,
            PolicyEval {
                name: name.clone(),
                cells,
                average_return: returns.iter().sum::<f64>() / returns.len() as f64,
                worst10_return: worst_decile_mean(&returns),
                returns,
                metrics,
            },
        ));
    }

    let mut head = header(&["policy", "trajectory"]);
    head.extend((0..dims).map(|i| format!("param_{i}")));
    head.push("return".into());
    let rows = evals.iter().flat_map(|(samples, e)| {
        samples.iter().enumerate().map(move |(j, (p, ret))| {
            let mut row = vec![e.name.clone(), j.to_string()];
            row.extend(p.iter().map(f64::to_string));
            row.push(ret.to_string());
            row
        })
    });
    write_csv(&out.join("trajectories.csv"), &head, rows)?;

    let policies: Vec<PolicyEval> = evals.into_iter().map(|(_, e)| e).collect();
    write_summary(&out.join("summary.csv"), &ks, &policies)?;
    Ok(EvalRun { ks, policies })
}

#[allow(clippy::too_many_arguments)]
fn heat_map(
    env: &Env,
    policy: &Policy,
    dist: &uorrl_core::ParamDistribution,
    grid: &[usize],
    m: usize,
    horizon: usize,
    pref: &PreferenceSpec,
    seed: u64,
) -> CliResult<Vec<Cell>> {
    let space = dist.space();
    let total: usize = grid.iter().product();
    (0..total)
        .into_par_iter()
        .map(|c| {
            // row-major, last axis fastest
            let mut rem = c;
            let mut index = vec![0; grid.len()];
            for axis in (0..grid.len()).rev() {
                index[axis] = rem % grid[axis];
                rem /= grid[axis];
            }
            let center: Vec<f64> = index
                .iter()
                .enumerate()
                .map(|(axis, &i)| {
                    let w = space.width(axis) / grid[axis] as f64;
                    space.lower()[axis] + (i as f64 + 0.5) * w
                })
                .collect();
            let mut rng = stream(seed, CELL_TAG, c as u64);
            let returns: Vec<f64> = collect(env, policy, &center, m, horizon, &mut rng)
                .map_err(|e| e.in_unit(c))?
                .iter()
                .map(|t| t.discounted_return)
                .collect();
            let value = returns.iter().sum::<f64>() / m as f64;
            if !value.is_finite() {
                return Err(uorrl_core::Error::NumericalFailure {
                    message: "non-finite heat-map cell".into(),
                    unit: Some(c),
                    step: None,
                }
                .into());
            }
            let metric = equal_mass_metric(&returns, pref)?.0;
            Ok(Cell {
                index,
                center,
                value,
                metric,
            })
        })
        .collect()
}

fn write_heat_map(path: &Path, cells: &[Cell], dims: usize) -> CliResult<()> {
    let head = if dims == 2 {
        header(&["x_index", "y_index", "x_center", "y_center", "value", "metric"])
    } else {
        header(&["x_index", "x_center", "value", "metric"])
    };
    let rows = cells.iter().map(|c| {
        let mut row: Vec<String> = c.index.iter().map(usize::to_string).collect();
        row.extend(c.center.iter().map(f64::to_string));
        row.push(c.value.to_string());
        row.push(c.metric.to_string());
        row
    });
    write_csv(path, &head, rows)
}

fn write_summary(path: &Path, ks: &[f64], policies: &[PolicyEval]) -> CliResult<()> {
    let mut head = header(&["statistic", "mean", "std"]);
    head.extend(policies.iter().map(|p| p.name.clone()));
    let mut stats: Vec<(String, Vec<f64>)> = ks
        .iter()
        .enumerate()
        .map(|(i, k)| (format!("metric_k{k}"), policies.iter().map(|p| p.metrics[i]).collect()))
        .collect();
    stats.push((
        "average_return".into(),
        policies.iter().map(|p| p.average_return).collect(),
    ));
    stats.push((
        "worst10_return".into(),
        policies.iter().map(|p| p.worst10_return).collect(),
    ));
    let rows = stats.into_iter().map(|(name, values)| {
        let (mean, std) = mean_std(&values);
        let mut row = vec![name, mean.to_string(), std.to_string()];
        row.extend(values.iter().map(f64::to_string));
        row
    });
    write_csv(path, &head, rows)
}

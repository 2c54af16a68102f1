//! Subcommand implementations. Each returns its results in memory as well as
//! writing its artifacts, so they can be driven from tests.

pub mod art_diff;
pub mod divide;
pub mod eval;
pub mod suggest;
pub mod train;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use uorrl_core::env::{rollout, Env};
use uorrl_core::rng::stream;
use uorrl_core::{ParamDistribution, Policy};

use crate::error::{CliError, CliResult};
use crate::policy_file::PolicyFile;

const SAMPLE_PARAM_TAG: u64 = 0x5a3;
const SAMPLE_ROLLOUT_TAG: u64 = 0x5a4;

/// `n` trajectory returns of `policy`, parameter `j` drawn iid from `dist`.
///
/// Parameters and rollouts come from streams keyed only by `seed` and `j`,
/// so different policies evaluated with the same seed see the same
/// parameters.
pub fn sample_returns(
    env: &Env,
    policy: &Policy,
    dist: &ParamDistribution,
    n: usize,
    horizon: usize,
    seed: u64,
) -> CliResult<Vec<(Vec<f64>, f64)>> {
    let mut param_rng = stream(seed, SAMPLE_PARAM_TAG, 0);
    let params = (0..n)
        .map(|_| dist.sample(&mut param_rng))
        .collect::<Result<Vec<_>, _>>()?;
    let out = params
        .into_par_iter()
        .enumerate()
        .map(|(j, p)| {
            let mut rng = stream(seed, SAMPLE_ROLLOUT_TAG, j as u64);
            let t = rollout(env, policy, &p, horizon, &mut rng).map_err(|e| e.in_unit(j))?;
            Ok((p, t.discounted_return))
        })
        .collect::<Result<Vec<_>, uorrl_core::Error>>()?;
    Ok(out)
}

/// Mean of the lowest `max(1, n / 10)` values.
pub fn worst_decile_mean(returns: &[f64]) -> f64 {
    let mut sorted = returns.to_vec();
    sorted.sort_by(f64::total_cmp);
    let count = (sorted.len() / 10).max(1).min(sorted.len());
    sorted[..count].iter().sum::<f64>() / count as f64
}

/// Loads policy files and checks each against the environment's spaces.
pub fn load_policies(env: &Env, paths: &[PathBuf]) -> CliResult<Vec<(String, Policy)>> {
    use uorrl_core::env::Pmdp;
    paths
        .iter()
        .map(|path| {
            let policy = PolicyFile::load(path)?.policy()?;
            policy
                .check_spaces(env.state_space(), env.action_space())
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            Ok((policy_name(path), policy))
        })
        .collect()
}

fn policy_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

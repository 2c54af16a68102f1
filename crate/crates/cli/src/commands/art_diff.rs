use std::path::{Path, PathBuf};

use uorrl_core::Error as CoreError;

use super::{load_policies, sample_returns};
use crate::artifacts::{header, write_csv};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const GROUPS: usize = 10;

/// Normalized ART differences between consecutive robustness degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtDiff {
    /// Robustness degrees in ascending order.
    pub ks: Vec<f64>,
    /// `art[i][g]`: average return of group `g` for the policy at `ks[i]`.
    pub art: Vec<[f64; GROUPS]>,
    /// `diffs[i][g] = (art[i + 1][g] - art[i][g]) / range`, with `range` the
    /// spread of all returns collected for all policies.
    pub diffs: Vec<[f64; GROUPS]>,
    pub range: f64,
}

/// Average return of each of 10 equal groups of the ascending-sorted
/// returns; group `g` holds sorted positions `[g n / 10, (g + 1) n / 10)`.
pub fn art_groups(returns: &[f64]) -> CliResult<[f64; GROUPS]> {
    let n = returns.len();
    if n < GROUPS {
        return Err(CoreError::Capacity(format!("ART groups need at least {GROUPS} trajectories, got {n}")).into());
    }
    let mut sorted = returns.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut art = [0.0; GROUPS];
    for (g, a) in art.iter_mut().enumerate() {
        let group = &sorted[g * n / GROUPS..(g + 1) * n / GROUPS];
        *a = group.iter().sum::<f64>() / group.len() as f64;
    }
    Ok(art)
}

/// Differences from per-policy returns, already ordered by ascending `k`.
pub fn art_diff_from_returns(ks: &[f64], returns: &[Vec<f64>]) -> CliResult<ArtDiff> {
    let art = returns.iter().map(|r| art_groups(r)).collect::<CliResult<Vec<_>>>()?;
    let all = returns.iter().flatten();
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let diffs = art
        .windows(2)
        .map(|w| {
            let mut d = [0.0; GROUPS];
            for g in 0..GROUPS {
                d[g] = if range > 0.0 { (w[1][g] - w[0][g]) / range } else { 0.0 };
            }
            d
        })
        .collect();
    Ok(ArtDiff {
        ks: ks.to_vec(),
        art,
        diffs,
        range,
    })
}

/// Samples `eval.n_trajectories` trajectories per policy (shared parameter
/// draws), sorts each policy's returns into 10 groups and writes
/// `art_diff.csv` with one row per consecutive `k` pair and group.
pub fn cmd_art_diff(cfg: &ExperimentConfig, policy_paths: &[PathBuf], ks: &[f64], out: &Path) -> CliResult<ArtDiff> {
    if policy_paths.len() < 2 || policy_paths.len() != ks.len() {
        return Err(CliError::config(
            "art-diff needs at least two policy files and one k per policy file",
        ));
    }
    let mut order: Vec<usize> = (0..ks.len()).collect();
    order.sort_by(|&a, &b| ks[a].total_cmp(&ks[b]));
    if order.windows(2).any(|w| ks[w[0]] == ks[w[1]]) {
        return Err(CliError::config("art-diff needs distinct k values"));
    }
    let r = cfg.resolve(cfg.eval.seed)?;
    let n = cfg.eval.n_trajectories;
    if n < GROUPS {
        return Err(CoreError::Capacity(format!("ART groups need at least {GROUPS} trajectories, got {n}")).into());
    }
    let policies = load_policies(&r.env, policy_paths)?;
    let returns = order
        .iter()
        .map(|&i| {
            let samples = sample_returns(
                &r.env,
                &policies[i].1,
                &r.distribution,
                n,
                cfg.metric.horizon,
                cfg.eval.seed,
            )?;
            Ok(samples.into_iter().map(|s| s.1).collect())
        })
        .collect::<CliResult<Vec<Vec<f64>>>>()?;
    let sorted_ks: Vec<f64> = order.iter().map(|&i| ks[i]).collect();
    let diff = art_diff_from_returns(&sorted_ks, &returns)?;

    let rows = diff.diffs.iter().enumerate().flat_map(|(i, d)| {
        let diff = &diff;
        (0..GROUPS).map(move |g| {
            vec![
                diff.ks[i].to_string(),
                diff.ks[i + 1].to_string(),
                g.to_string(),
                diff.art[i][g].to_string(),
                diff.art[i + 1][g].to_string(),
                d[g].to_string(),
            ]
        })
    });
    write_csv(
        &out.join("art_diff.csv"),
        &header(&["k_from", "k_to", "group", "art_from", "art_to", "normalized_diff"]),
        rows,
    )?;
    Ok(diff)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_and_normalization() {
        let a: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let art = art_groups(&a).unwrap();
        assert_eq!(art[0], 0.5);
        assert_eq!(art[9], 18.5);
        let same = art_diff_from_returns(&[0.0, 1.0], &[a.clone(), a.clone()]).unwrap();
        assert!(same.diffs[0].iter().all(|d| *d == 0.0));
        let flat = art_diff_from_returns(&[0.0, 1.0], &[vec![2.0; 10], vec![2.0; 10]]).unwrap();
        assert!(flat.diffs[0].iter().all(|d| *d == 0.0));
        let shifted: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        let d = art_diff_from_returns(&[0.0, 1.0], &[a, shifted]).unwrap();
        assert!(d.diffs[0].iter().all(|v| (v - 1.0 / 20.0).abs() < 1e-15));
    }

    #[test]
    fn too_few_trajectories() {
        let err = art_groups(&[1.0; 9]).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use uorrl_core::env::Pmdp;
use uorrl_core::trainer::train_with;
use uorrl_core::{MetricReport, Policy};

use crate::artifacts::{header, write_audit, write_csv, write_history, write_timing};
use crate::config::{ExperimentConfig, Resolved, Sizing};
use crate::error::{CliError, CliResult};
use crate::policy_file::PolicyFile;

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub policy: Policy,
    pub history: Vec<MetricReport>,
    pub policy_path: PathBuf,
    pub history_path: PathBuf,
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub sizing: Sizing,
    pub runs: Vec<SeedRun>,
}

pub fn policy_path(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("policy_seed{seed}.json"))
}

pub fn history_path(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("history_seed{seed}.csv"))
}

/// Trains one policy per seed. Per seed `s`, writes `policy_seed{s}.json`,
/// `history_seed{s}.csv` (iteration, metric value), `timing_seed{s}.csv`
/// (iteration, wall time) and `audit_seed{s}.csv` (the last iteration's
/// ranked units). `sizing.csv` records the resolved metric sizing.
///
/// The whole configuration is validated for every seed before the first
/// rollout. A numerical failure stops the run after writing the partial
/// history of the failing seed.
pub fn cmd_train(cfg: &ExperimentConfig, seeds: Option<&[u64]>, out: Option<&Path>) -> CliResult<TrainRun> {
    let seeds: Vec<u64> = seeds.map(<[u64]>::to_vec).unwrap_or_else(|| cfg.seeds.clone());
    if seeds.is_empty() {
        return Err(CliError::config("no seeds to run"));
    }
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.clone());
    let resolved: Vec<Resolved> = seeds.iter().map(|&s| cfg.resolve(s)).collect::<CliResult<_>>()?;
    let sizing = cfg.sizing(&resolved[0].distribution)?;

    fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    fs::write(out.join("config.json"), cfg.to_json() + "\n").map_err(|e| CliError::io(out.join("config.json"), e))?;
    write_sizing(&out.join("sizing.csv"), &sizing)?;
    match sizing {
        Sizing::Db { delta, blocks, .. } => println!("mode db: delta = {delta}, {blocks} blocks"),
        Sizing::Df { n1, n2 } => println!("mode df: n1 = {n1}, n2 = {n2}"),
    }

    let mut runs = Vec::with_capacity(seeds.len());
    for (seed, r) in seeds.iter().copied().zip(resolved) {
        let start = Instant::now();
        let mut times = Vec::with_capacity(r.train.max_iterations);
        let outcome = train_with(&r.env, &r.train, |_, _| times.push(start.elapsed().as_secs_f64()))?;

        let policy_path = policy_path(&out, seed);
        let history_path = history_path(&out, seed);
        PolicyFile::new(&outcome.policy, r.env.name(), seed).save(&policy_path)?;
        write_history(&history_path, &outcome.history)?;
        write_timing(&out.join(format!("timing_seed{seed}.csv")), &times)?;
        if let Some(last) = outcome.history.last() {
            write_audit(&out.join(format!("audit_seed{seed}.csv")), last)?;
        }
        if let Some(e) = outcome.failure {
            return Err(CliError::Core(e));
        }
        println!(
            "seed {seed}: {} iterations, final metric {}",
            outcome.history.len(),
            outcome.history.last().map_or(f64::NAN, |h| h.value)
        );
        runs.push(SeedRun {
            seed,
            policy: outcome.policy,
            history: outcome.history,
            policy_path,
            history_path,
        });
    }
    Ok(TrainRun { sizing, runs })
}

fn write_sizing(path: &Path, sizing: &Sizing) -> CliResult<()> {
    let row = match *sizing {
        Sizing::Db {
            delta,
            blocks,
            n_rollouts_per_block,
        } => vec![
            "db".into(),
            delta.to_string(),
            blocks.to_string(),
            n_rollouts_per_block.to_string(),
            String::new(),
            String::new(),
        ],
        Sizing::Df { n1, n2 } => vec![
            "df".into(),
            String::new(),
            String::new(),
            String::new(),
            n1.to_string(),
            n2.to_string(),
        ],
    };
    write_csv(
        path,
        &header(&["mode", "delta", "blocks", "n_rollouts_per_block", "n1", "n2"]),
        [row],
    )
}

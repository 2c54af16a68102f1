//! Experiment runner for UOR-metric training: JSON configs, the `divide`,
//! `train`, `eval`, `art-diff` and `suggest-sizes` subcommands, and their CSV
//! artifacts.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod policy_file;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use policy_file::PolicyFile;

/// Sizes the global rayon pool from `UORRL_THREADS` when set.
pub fn init_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("UORRL_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::config(format!("UORRL_THREADS must be a positive integer, got `{value}`")))?;
    // a pool that is already initialized keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

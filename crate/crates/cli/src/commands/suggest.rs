use uorrl_core::metric::{suggest_cluster_sizes, suggest_delta};

use crate::error::CliResult;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Suggestion {
    pub delta: f64,
    pub n1: usize,
    pub n2: usize,
}

/// Block diameter for DB mode and cluster count/size for DF mode at target
/// accuracy `epsilon` and failure probability `rho`.
pub fn cmd_suggest_sizes(epsilon: f64, rho: f64, d: usize, c1: f64, c2: f64, scale: f64) -> CliResult<Suggestion> {
    let delta = suggest_delta(epsilon, scale)?;
    let (n1, n2) = suggest_cluster_sizes(epsilon, rho, d, c1, c2)?;
    println!("delta\t{delta}");
    println!("n1\t{n1}");
    println!("n2\t{n2}");
    Ok(Suggestion { delta, n1, n2 })
}

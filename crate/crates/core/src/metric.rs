//! Discretized estimators of the UOR metric.
//!
//! The distribution-based estimator evaluates the policy at one
//! representative point per block of a division of the parameter space and
//! weights the sorted block returns by the preference integral over their
//! cumulative block mass. The distribution-free estimator never sees the
//! distribution: it groups observed trajectories into `n1` clusters of `n2`,
//! sorts the cluster means and gives rank `j` the weight
//! `integral_{(j-1)/n1}^{j/n1} W`.

use alloc::format;
use alloc::vec::Vec;

// inherent float methods shadow these in some builds
#[allow(unused_imports)]
use num_traits::Float;

use rand::{Rng, RngCore};

use crate::env::{collect, Pmdp, Trajectory};
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::preference::{LedgerEntry, PreferenceSpec, RankedLedger};
use crate::rng::{stream, StreamRng};
use crate::space::{compute_masses, set_division, Block, ParamDistribution, ParamProcess};

/// Default rollouts per block for the distribution-based estimator.
pub const DEFAULT_ROLLOUTS_PER_BLOCK: usize = 8;

/// Default rollout length cap; the truncation horizon usually binds first.
pub const DEFAULT_HORIZON: usize = 1000;

const BLOCK_TAG: u64 = 0x0b10c;
const CLUSTER_TAG: u64 = 0xc1057;
const PARAM_TAG: u64 = 0x9a4a;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricMode {
    /// Distribution-based (blocks with known masses).
    Db,
    /// Distribution-free (clusters of observed trajectories).
    Df,
}

/// Blocks with filled masses plus the per-block evaluation budget.
#[derive(Debug, Clone, PartialEq)]
pub struct DbMetricConfig {
    pub delta: f64,
    pub n_rollouts_per_block: usize,
    pub horizon: usize,
    blocks: Vec<Block>,
}

impl DbMetricConfig {
    pub fn new(blocks: Vec<Block>, delta: f64, n_rollouts_per_block: usize) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::invalid("distribution-based metric needs at least one block"));
        }
        if n_rollouts_per_block == 0 {
            return Err(Error::invalid("n_rollouts_per_block must be at least 1"));
        }
        if blocks.iter().any(|b| !(b.mass >= 0.0 && b.mass.is_finite())) {
            return Err(Error::invalid("block masses must be finite and nonnegative"));
        }
        let total: f64 = blocks.iter().map(|b| b.mass).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("block masses sum to {total}, expected 1")));
        }
        Ok(Self {
            delta,
            n_rollouts_per_block,
            horizon: DEFAULT_HORIZON,
            blocks,
        })
    }

    /// Divides the distribution's space with diameter bound `delta` and fills
    /// exact block masses.
    pub fn from_distribution(dist: &ParamDistribution, delta: f64, n_rollouts_per_block: usize) -> Result<Self> {
        let blocks = compute_masses(&set_division(dist.space(), delta)?, dist)?;
        Self::new(blocks, delta, n_rollouts_per_block)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn masses(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.mass).collect()
    }
}

/// Trajectories gathered for one block or one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitBatch {
    pub id: usize,
    pub trajectories: Vec<Trajectory>,
    pub mean_return: f64,
}

/// A distribution-free cluster.
pub type Cluster = UnitBatch;

impl UnitBatch {
    pub fn new(id: usize, trajectories: Vec<Trajectory>) -> Self {
        let n = trajectories.len().max(1) as f64;
        let mean_return = trajectories.iter().map(|t| t.discounted_return).sum::<f64>() / n;
        Self {
            id,
            trajectories,
            mean_return,
        }
    }
}

/// A metric value with the ranked ledger that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub value: f64,
    pub ledger: RankedLedger,
    pub mode: MetricMode,
}

impl MetricReport {
    /// Weight of each unit, indexed by unit id.
    pub fn weights_by_unit(&self) -> Vec<f64> {
        let mut w = alloc::vec![0.0; self.ledger.len()];
        for e in self.ledger.entries() {
            w[e.source_id] = e.weight;
        }
        w
    }
}

#[cfg(feature = "parallel")]
fn map_units<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_units<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Rolls out `cfg.n_rollouts_per_block` trajectories at every block's
/// representative. Block `j` draws from stream `j` under `seed`.
pub fn collect_blocks<E: Pmdp + Sync>(
    env: &E,
    policy: &Policy,
    cfg: &DbMetricConfig,
    seed: u64,
) -> Result<Vec<UnitBatch>> {
    map_units(cfg.blocks.len(), |j| {
        let mut rng = stream(seed, BLOCK_TAG, j as u64);
        let block = &cfg.blocks[j];
        let trajs = collect(
            env,
            policy,
            &block.representative,
            cfg.n_rollouts_per_block,
            cfg.horizon,
            &mut rng,
        )
        .map_err(|e| e.in_unit(j))?;
        Ok(UnitBatch::new(j, trajs))
    })
}

/// Sorts block returns ascending and accumulates
/// `w_j = integral_M^{M + m_j} W` with `M` advancing in sorted order.
///
/// `returns[j]` belongs to `blocks[j]`. Masses are rescaled by their sum, and
/// the interval of the last block with positive mass is closed at 1 so the
/// weights sum to exactly `integral_0^1 W`.
pub fn db_metric_from_returns(blocks: &[Block], returns: &[f64], pref: &PreferenceSpec) -> Result<MetricReport> {
    if blocks.is_empty() {
        return Err(Error::invalid("distribution-based metric needs at least one block"));
    }
    if blocks.len() != returns.len() {
        return Err(Error::invalid("one return per block is required"));
    }
    if let Some(j) = returns.iter().position(|r| r.is_nan()) {
        return Err(Error::NumericalFailure {
            message: "NaN block return".into(),
            unit: Some(j),
            step: None,
        });
    }
    let total: f64 = blocks.iter().map(|b| b.mass).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("block masses sum to {total}, expected 1")));
    }

    let mut order: Vec<usize> = (0..blocks.len()).collect();
    order.sort_by(|&a, &b| returns[a].total_cmp(&returns[b]));
    let last = order
        .iter()
        .rposition(|&j| blocks[j].mass > 0.0)
        .unwrap_or(order.len() - 1);

    let mut value = 0.0;
    let mut cumulative = 0.0;
    let mut entries = Vec::with_capacity(order.len());
    for (rank, &j) in order.iter().enumerate() {
        let mass = blocks[j].mass / total;
        let (lo, hi) = if rank > last {
            (1.0, 1.0)
        } else if rank == last {
            (cumulative.min(1.0), 1.0)
        } else {
            (cumulative.min(1.0), (cumulative + mass).min(1.0))
        };
        let weight = pref.weight_integral(lo, hi)?;
        value += weight * returns[j];
        entries.push(LedgerEntry {
            value: returns[j],
            mass,
            weight,
            source_id: j,
            prefix: cumulative,
        });
        cumulative += mass;
    }
    Ok(MetricReport {
        value,
        ledger: RankedLedger::from_sorted(entries),
        mode: MetricMode::Db,
    })
}

/// Distribution-based metric with a caller-supplied return for each block,
/// e.g. an exact oracle in place of Monte-Carlo rollouts.
pub fn db_metric_with<F>(cfg: &DbMetricConfig, pref: &PreferenceSpec, mut evaluate: F) -> Result<MetricReport>
where
    F: FnMut(&Block) -> Result<f64>,
{
    let returns = cfg
        .blocks
        .iter()
        .map(|b| evaluate(b).map_err(|e| e.in_unit(b.id)))
        .collect::<Result<Vec<_>>>()?;
    db_metric_from_returns(&cfg.blocks, &returns, pref)
}

/// Distribution-based metric from fresh rollouts, also returning the per-block
/// trajectories.
pub fn db_metric_batches<E: Pmdp + Sync>(
    env: &E,
    policy: &Policy,
    cfg: &DbMetricConfig,
    pref: &PreferenceSpec,
    seed: u64,
) -> Result<(MetricReport, Vec<UnitBatch>)> {
    let batches = collect_blocks(env, policy, cfg, seed)?;
    let returns: Vec<f64> = batches.iter().map(|b| b.mean_return).collect();
    let report = db_metric_from_returns(&cfg.blocks, &returns, pref)?;
    Ok((report, batches))
}

/// Distribution-based metric estimate `E_hat` of `policy`.
pub fn db_metric<E: Pmdp + Sync, R: RngCore + ?Sized>(
    env: &E,
    policy: &Policy,
    cfg: &DbMetricConfig,
    pref: &PreferenceSpec,
    rng: &mut R,
) -> Result<MetricReport> {
    let seed = rng.next_u64();
    Ok(db_metric_batches(env, policy, cfg, pref, seed)?.0)
}

/// Sizing of the distribution-free estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfSizing {
    /// Number of clusters.
    pub n1: usize,
    /// Trajectories per cluster.
    pub n2: usize,
    pub horizon: usize,
}

impl DfSizing {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::invalid("n1 and n2 must be at least 1"));
        }
        Ok(Self {
            n1,
            n2,
            horizon: DEFAULT_HORIZON,
        })
    }
}

/// Draws `n1 * n2` parameters from `process` in order (cluster `j` gets draws
/// `j * n2 .. (j + 1) * n2`) and rolls out one trajectory per parameter.
pub fn collect_clusters<E: Pmdp + Sync>(
    env: &E,
    policy: &Policy,
    sizing: DfSizing,
    process: &mut ParamProcess,
    seed: u64,
) -> Result<Vec<Cluster>> {
    let mut param_rng = stream(seed, PARAM_TAG, 0);
    let mut params = Vec::with_capacity(sizing.n1);
    for _ in 0..sizing.n1 {
        let cluster: Vec<Vec<f64>> = (0..sizing.n2)
            .map(|_| process.next(&mut param_rng))
            .collect::<Result<_>>()?;
        params.push(cluster);
    }
    map_units(sizing.n1, |j| {
        let mut rng: StreamRng = stream(seed, CLUSTER_TAG, j as u64);
        let trajs = params[j]
            .iter()
            .map(|p| crate::env::rollout(env, policy, p, sizing.horizon, &mut rng))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_unit(j))?;
        Ok(UnitBatch::new(j, trajs))
    })
}

/// Sorts cluster means ascending and weights rank `j` (0-based) with
/// `integral_{j/n}^{(j+1)/n} W`, `n` the number of clusters.
pub fn df_metric_from_means(means: &[f64], pref: &PreferenceSpec) -> Result<MetricReport> {
    if means.is_empty() {
        return Err(Error::invalid("distribution-free metric needs at least one cluster"));
    }
    if let Some(j) = means.iter().position(|r| r.is_nan()) {
        return Err(Error::NumericalFailure {
            message: "NaN cluster mean".into(),
            unit: Some(j),
            step: None,
        });
    }
    let n = means.len();
    let nf = n as f64;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| means[a].total_cmp(&means[b]));
    let mut value = 0.0;
    let mut entries = Vec::with_capacity(n);
    for (rank, &j) in order.iter().enumerate() {
        let lo = rank as f64 / nf;
        let hi = (rank + 1) as f64 / nf;
        let weight = pref.weight_integral(lo, hi)?;
        value += weight * means[j];
        entries.push(LedgerEntry {
            value: means[j],
            mass: 1.0 / nf,
            weight,
            source_id: j,
            prefix: lo,
        });
    }
    Ok(MetricReport {
        value,
        ledger: RankedLedger::from_sorted(entries),
        mode: MetricMode::Df,
    })
}

/// Distribution-free metric from fresh clusters, also returning them.
pub fn df_metric_clusters<E: Pmdp + Sync>(
    env: &E,
    policy: &Policy,
    sizing: DfSizing,
    process: &mut ParamProcess,
    pref: &PreferenceSpec,
    seed: u64,
) -> Result<(MetricReport, Vec<Cluster>)> {
    let clusters = collect_clusters(env, policy, sizing, process, seed)?;
    let means: Vec<f64> = clusters.iter().map(|c| c.mean_return).collect();
    Ok((df_metric_from_means(&means, pref)?, clusters))
}

/// Distribution-free metric estimate `E_tilde` of `policy`. Clusters are
/// rebuilt on every call; the parameter process keeps its state.
pub fn df_metric<E: Pmdp + Sync, R: RngCore + ?Sized>(
    env: &E,
    policy: &Policy,
    sizing: DfSizing,
    process: &mut ParamProcess,
    pref: &PreferenceSpec,
    rng: &mut R,
) -> Result<MetricReport> {
    let seed = rng.next_u64();
    Ok(df_metric_clusters(env, policy, sizing, process, pref, seed)?.0)
}

/// `ceil(x)`, ignoring floating-point excess below relative `1e-12`.
fn ceil_tolerant(x: f64) -> f64 {
    (x * (1.0 - 1e-12)).ceil()
}

/// Diameter bound `scale * epsilon` for a target suboptimality `epsilon`;
/// `scale` stands in for the problem's Lipschitz-dependent constant.
pub fn suggest_delta(epsilon: f64, scale: f64) -> Result<f64> {
    if !(epsilon > 0.0 && scale > 0.0) {
        return Err(Error::invalid("epsilon and scale must be positive"));
    }
    Ok(scale * epsilon)
}

/// Cluster count `n1 = ceil(c1 ln(1/rho) / eps^2)` and cluster size
/// `n2 = ceil(c2 ln(1/rho) / eps^(2d+2))`.
pub fn suggest_cluster_sizes(epsilon: f64, rho: f64, d: usize, c1: f64, c2: f64) -> Result<(usize, usize)> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid(format!("confidence rho must lie in (0, 1), got {rho}")));
    }
    if !(epsilon > 0.0) || !(c1 > 0.0) || !(c2 > 0.0) || d == 0 {
        return Err(Error::invalid("epsilon, c1, c2 and d must be positive"));
    }
    let log_term = -rho.ln();
    let n1 = ceil_tolerant(c1 * log_term / (epsilon * epsilon));
    let n2 = ceil_tolerant(c2 * log_term / epsilon.powi(2 * d as i32 + 2));
    let limit = 1e15;
    if !(n1 <= limit && n2 <= limit) {
        return Err(Error::Capacity(format!(
            "suggested cluster sizes n1 = {n1:e}, n2 = {n2:e} are too large"
        )));
    }
    Ok((n1.max(1.0) as usize, n2.max(1.0) as usize))
}

/// Draws a fresh seed for one estimator call.
pub fn draw_seed<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    rng.next_u64()
}

//! Environment-parameter geometry.
//!
//! A [`ParameterSpace`] is an axis-aligned hyperrectangle. [`set_division`]
//! cuts it into a grid of [`Block`]s whose diameters never exceed a requested
//! bound, and [`compute_masses`] fills in the probability each block receives
//! under a [`ParamDistribution`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

// inherent float methods shadow these in some builds
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Maximum rejection-sampling attempts per axis for truncated Gaussians.
pub const MAX_REJECTION_ATTEMPTS: usize = 10_000;

/// Default sample count for Monte-Carlo block masses.
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

/// Relative slack when deciding whether a ratio sits on an integer.
const CELL_COUNT_SLACK: f64 = 1e-12;

/// Axis-aligned box `[lower_0, upper_0] x ... x [lower_{d-1}, upper_{d-1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParameterSpace {
    /// Builds a space; every axis must satisfy `lower < upper` with finite bounds.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::invalid("parameter space needs at least one axis"));
        }
        if lower.len() != upper.len() {
            return Err(Error::invalid(format!(
                "lower has {} axes but upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        for (axis, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::invalid(format!("axis {axis}: bounds must be finite")));
            }
            if !(lo < hi) {
                return Err(Error::invalid(format!(
                    "axis {axis}: lower bound {lo} must be below upper bound {hi}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower], vec![upper])
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn diameter(&self) -> f64 {
        box_diameter(&self.lower, &self.upper)
    }

    pub fn volume(&self) -> f64 {
        box_volume(&self.lower, &self.upper)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dims()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| *l <= *x && *x <= *u)
    }

    pub(crate) fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dims() {
            return Err(Error::invalid(format!(
                "point has {} coordinates, space has {} axes",
                p.len(),
                self.dims()
            )));
        }
        if !self.contains(p) {
            return Err(Error::invalid("point lies outside the parameter space"));
        }
        Ok(())
    }
}

fn box_diameter(lower: &[f64], upper: &[f64]) -> f64 {
    lower
        .iter()
        .zip(upper)
        .map(|(l, u)| (u - l) * (u - l))
        .sum::<f64>()
        .sqrt()
}

fn box_volume(lower: &[f64], upper: &[f64]) -> f64 {
    lower.iter().zip(upper).map(|(l, u)| u - l).product()
}

/// The shape of a parameter distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionKind {
    Uniform,
    /// Independent per-axis Gaussians truncated to the space.
    TruncatedGaussian {
        mean: Vec<f64>,
        std: Vec<f64>,
    },
    /// Finitely many atoms.
    Empirical {
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    Mixture {
        components: Vec<ParamDistribution>,
        weights: Vec<f64>,
    },
}

/// A probability distribution supported on a [`ParameterSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamDistribution {
    kind: DistributionKind,
    space: ParameterSpace,
}

fn check_weights(weights: &[f64], what: &str) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::invalid(format!("{what}: no weights")));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid(format!(
            "{what}: weights must be finite and nonnegative"
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("{what}: weights sum to {total}, expected 1")));
    }
    Ok(())
}

impl ParamDistribution {
    pub fn uniform(space: ParameterSpace) -> Self {
        Self {
            kind: DistributionKind::Uniform,
            space,
        }
    }

    pub fn truncated_gaussian(space: ParameterSpace, mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        let d = space.dims();
        if mean.len() != d || std.len() != d {
            return Err(Error::invalid(format!(
                "truncated gaussian needs {d} means and standard deviations"
            )));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("truncated gaussian mean must be finite"));
        }
        if std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("truncated gaussian std must be positive"));
        }
        Ok(Self {
            kind: DistributionKind::TruncatedGaussian { mean, std },
            space,
        })
    }

    pub fn empirical(space: ParameterSpace, points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::invalid("empirical: points and weights differ in length"));
        }
        check_weights(&weights, "empirical")?;
        for p in &points {
            space.check_point(p)?;
        }
        Ok(Self {
            kind: DistributionKind::Empirical { points, weights },
            space,
        })
    }

    pub fn mixture(components: Vec<ParamDistribution>, weights: Vec<f64>) -> Result<Self> {
        if components.len() != weights.len() {
            return Err(Error::invalid("mixture: components and weights differ in length"));
        }
        check_weights(&weights, "mixture")?;
        let space = components[0].space.clone();
        if components.iter().any(|c| c.space != space) {
            return Err(Error::invalid("mixture components must share one parameter space"));
        }
        Ok(Self {
            kind: DistributionKind::Mixture { components, weights },
            space,
        })
    }

    pub fn kind(&self) -> &DistributionKind {
        &self.kind
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    /// Draws one parameter vector. Truncated Gaussians use rejection against
    /// the untruncated Gaussian, axis by axis.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let space = &self.space;
        match &self.kind {
            DistributionKind::Uniform => Ok((0..space.dims())
                .map(|i| space.lower[i] + rng.random::<f64>() * space.width(i))
                .collect()),
            DistributionKind::TruncatedGaussian { mean, std } => (0..space.dims())
                .map(|axis| {
                    for _ in 0..MAX_REJECTION_ATTEMPTS {
                        let z: f64 = StandardNormal.sample(rng);
                        let x = mean[axis] + std[axis] * z;
                        if space.lower[axis] <= x && x <= space.upper[axis] {
                            return Ok(x);
                        }
                    }
                    Err(Error::DegenerateTruncation {
                        axis,
                        attempts: MAX_REJECTION_ATTEMPTS,
                    })
                })
                .collect(),
            DistributionKind::Empirical { points, weights } => Ok(points[pick_index(weights, rng)].clone()),
            DistributionKind::Mixture { components, weights } => components[pick_index(weights, rng)].sample(rng),
        }
    }

    /// Exact probability of the closed box `[lower, upper]` for the
    /// continuous kinds, and of the half-open grid cell for atoms (atoms are
    /// assigned by the caller).
    fn box_probability(&self, lower: &[f64], upper: &[f64]) -> f64 {
        let space = &self.space;
        match &self.kind {
            DistributionKind::Uniform => box_volume(lower, upper) / space.volume(),
            DistributionKind::TruncatedGaussian { mean, std } => (0..space.dims())
                .map(|i| {
                    let cdf = |x: f64| normal_cdf((x - mean[i]) / std[i]);
                    let total = cdf(space.upper[i]) - cdf(space.lower[i]);
                    (cdf(upper[i]) - cdf(lower[i])) / total
                })
                .product(),
            DistributionKind::Empirical { .. } | DistributionKind::Mixture { .. } => {
                unreachable!("atoms are assigned per block")
            }
        }
    }
}

fn pick_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the cumulative sum
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

/// One cell of a division of the parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Point at which returns for the whole block are evaluated (the center).
    pub representative: Vec<f64>,
    /// Probability of the block under the distribution; 0 until computed.
    pub mass: f64,
}

impl Block {
    pub fn diameter(&self) -> f64 {
        box_diameter(&self.lower, &self.upper)
    }

    pub fn volume(&self) -> f64 {
        box_volume(&self.lower, &self.upper)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (l, u))| *l <= *x && *x <= *u)
    }
}

/// Number of grid cells of edge `edge` needed to cover `width`.
///
/// A ratio sitting within floating-point slack above an integer is rounded
/// down so that an exact fit does not spawn a sliver cell.
fn cell_count(width: f64, edge: f64) -> usize {
    let ratio = width / edge;
    let n = ratio.ceil().max(1.0);
    if n > 1.0 && n - 1.0 >= ratio * (1.0 - CELL_COUNT_SLACK) {
        (n - 1.0) as usize
    } else {
        n as usize
    }
}

/// Per-axis cell edges of the grid used by [`set_division`].
fn axis_edges(space: &ParameterSpace, delta: f64) -> Vec<Vec<f64>> {
    let edge = delta / (space.dims() as f64).sqrt();
    (0..space.dims())
        .map(|axis| {
            let lo = space.lower[axis];
            let hi = space.upper[axis];
            let n = cell_count(hi - lo, edge);
            let mut edges: Vec<f64> = (0..n).map(|t| lo + edge * t as f64).collect();
            edges.push(hi);
            edges
        })
        .collect()
}

/// Divides `space` into a grid of cubes with edge `delta / sqrt(d)` (the last
/// cell on each axis is cut at the space boundary), so every block has
/// diameter at most `delta`.
///
/// Blocks are numbered row-major with the first axis slowest. Representatives
/// are block centers; masses are left at 0.
pub fn set_division(space: &ParameterSpace, delta: f64) -> Result<Vec<Block>> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid(format!(
            "delta must be positive and finite, got {delta}"
        )));
    }
    let edges = axis_edges(space, delta);
    let counts: Vec<usize> = edges.iter().map(|e| e.len() - 1).collect();
    let total: usize = counts.iter().product();

    let mut blocks = Vec::with_capacity(total);
    let mut index = vec![0usize; space.dims()];
    for id in 0..total {
        let lower: Vec<f64> = index.iter().enumerate().map(|(a, &t)| edges[a][t]).collect();
        let upper: Vec<f64> = index.iter().enumerate().map(|(a, &t)| edges[a][t + 1]).collect();
        let representative = lower.iter().zip(&upper).map(|(l, u)| 0.5 * (l + u)).collect();
        blocks.push(Block {
            id,
            lower,
            upper,
            representative,
            mass: 0.0,
        });
        // advance the mixed-radix counter, last axis fastest
        for axis in (0..index.len()).rev() {
            index[axis] += 1;
            if index[axis] < counts[axis] {
                break;
            }
            index[axis] = 0;
        }
    }
    Ok(blocks)
}

/// Checks that `blocks` lie in `space` and their volumes add up to it.
pub fn check_division(blocks: &[Block], space: &ParameterSpace) -> Result<()> {
    if blocks.is_empty() {
        return Err(Error::InconsistentDivision("no blocks".into()));
    }
    let tol = 1e-9;
    for b in blocks {
        if b.lower.len() != space.dims() || b.upper.len() != space.dims() {
            return Err(Error::InconsistentDivision(format!(
                "block {} has the wrong dimension",
                b.id
            )));
        }
        let scale = space.diameter();
        let inside = (0..space.dims()).all(|i| {
            b.lower[i] >= space.lower[i] - tol * scale
                && b.upper[i] <= space.upper[i] + tol * scale
                && b.lower[i] <= b.upper[i]
        });
        if !inside {
            return Err(Error::InconsistentDivision(format!(
                "block {} leaves the parameter space",
                b.id
            )));
        }
    }
    let covered: f64 = blocks.iter().map(Block::volume).sum();
    let volume = space.volume();
    if (covered - volume).abs() > tol * volume {
        return Err(Error::InconsistentDivision(format!(
            "blocks cover volume {covered}, space has {volume}"
        )));
    }
    Ok(())
}

/// First block (in id order) containing `p`; on shared faces this is the
/// lower-index cell.
pub fn locate(blocks: &[Block], p: &[f64]) -> Option<usize> {
    blocks.iter().position(|b| b.contains(p))
}

fn raw_masses(blocks: &[Block], dist: &ParamDistribution) -> Result<Vec<f64>> {
    match &dist.kind {
        DistributionKind::Uniform | DistributionKind::TruncatedGaussian { .. } => Ok(blocks
            .iter()
            .map(|b| dist.box_probability(&b.lower, &b.upper))
            .collect()),
        DistributionKind::Empirical { points, weights } => {
            let mut masses = vec![0.0; blocks.len()];
            for (p, w) in points.iter().zip(weights) {
                let j = locate(blocks, p)
                    .ok_or_else(|| Error::InconsistentDivision("an atom lies outside every block".into()))?;
                masses[j] += w;
            }
            Ok(masses)
        }
        DistributionKind::Mixture { components, weights } => {
            let mut masses = vec![0.0; blocks.len()];
            for (c, w) in components.iter().zip(weights) {
                for (m, cm) in masses.iter_mut().zip(raw_masses(blocks, c)?) {
                    *m += w * cm;
                }
            }
            Ok(masses)
        }
    }
}

fn with_masses(blocks: &[Block], masses: &[f64]) -> Result<Vec<Block>> {
    let total: f64 = masses.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::numerical("block masses do not sum to a positive value"));
    }
    Ok(blocks
        .iter()
        .zip(masses)
        .map(|(b, m)| Block {
            mass: m / total,
            ..b.clone()
        })
        .collect())
}

/// Fills every block's mass with its exact probability under `dist`.
///
/// Uniform masses are volume ratios, truncated Gaussian masses are products
/// of per-axis interval probabilities, atoms go to the lower-index cell that
/// contains them and mixtures combine their components linearly. Masses are
/// renormalized to sum to 1.
pub fn compute_masses(blocks: &[Block], dist: &ParamDistribution) -> Result<Vec<Block>> {
    check_division(blocks, &dist.space)?;
    let masses = raw_masses(blocks, dist)?;
    with_masses(blocks, &masses)
}

/// Block masses estimated from `n_mc` draws of `dist`, for distributions only
/// available as samplers. Returns the blocks and the per-block standard errors
/// `sqrt(m (1 - m) / n_mc)`.
pub fn monte_carlo_masses<R: Rng + ?Sized>(
    blocks: &[Block],
    dist: &ParamDistribution,
    n_mc: usize,
    rng: &mut R,
) -> Result<(Vec<Block>, Vec<f64>)> {
    if n_mc == 0 {
        return Err(Error::invalid("n_mc must be positive"));
    }
    check_division(blocks, &dist.space)?;
    let mut counts = vec![0usize; blocks.len()];
    for _ in 0..n_mc {
        let p = dist.sample(rng)?;
        let j = locate(blocks, &p)
            .ok_or_else(|| Error::InconsistentDivision("a sample lies outside every block".into()))?;
        counts[j] += 1;
    }
    let n = n_mc as f64;
    let masses: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let std_errs = masses.iter().map(|m| (m * (1.0 - m) / n).sqrt()).collect();
    Ok((with_masses(blocks, &masses)?, std_errs))
}

/// Half the L1 distance between two mass vectors.
pub fn total_variation_masses(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid("mass vectors differ in length"));
    }
    let tv = 0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>();
    Ok(tv.min(1.0))
}

/// Total variation distance between `a` and `b` at the granularity of
/// `blocks`.
///
/// Only the block masses are compared, so this is a lower bound on the
/// continuous total variation distance; the two agree when both densities are
/// constant on every block.
pub fn total_variation(a: &ParamDistribution, b: &ParamDistribution, blocks: &[Block]) -> Result<f64> {
    if a.space != b.space {
        return Err(Error::invalid("distributions live on different parameter spaces"));
    }
    let ma: Vec<f64> = compute_masses(blocks, a)?.iter().map(|b| b.mass).collect();
    let mb: Vec<f64> = compute_masses(blocks, b)?.iter().map(|b| b.mass).collect();
    total_variation_masses(&ma, &mb)
}

/// Reflects `x` into `[lo, hi]` (mirror at both walls, any distance).
fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    let period = 2.0 * width;
    let mut z = libm::fmod(x - lo, period);
    if z < 0.0 {
        z += period;
    }
    if z > width {
        z = period - z;
    }
    (lo + z).clamp(lo, hi)
}

/// Next parameter of the drifting process: a uniform perturbation with
/// infinity-norm at most `step_bound`, reflected at the boundary of the
/// space. An infinite `step_bound` redraws independently from `dist`.
pub fn parameter_process_next<R: Rng + ?Sized>(
    current: &[f64],
    step_bound: f64,
    dist: &ParamDistribution,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if step_bound.is_infinite() && step_bound > 0.0 {
        return dist.sample(rng);
    }
    if !(step_bound >= 0.0) {
        return Err(Error::invalid("step bound must be nonnegative"));
    }
    let space = &dist.space;
    dist.space.check_point(current)?;
    Ok(current
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let u = if step_bound > 0.0 {
                rng.random_range(-step_bound..=step_bound)
            } else {
                0.0
            };
            reflect(x + u, space.lower[i], space.upper[i])
        })
        .collect())
}

/// Where the parameters observed by the distribution-free estimator come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamSource {
    /// Independent draws from the distribution for every trajectory.
    Iid,
    /// Reflected random walk with the given per-trajectory step bound.
    Drift { step_bound: f64 },
}

/// Stateful parameter stream feeding the distribution-free estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamProcess {
    dist: ParamDistribution,
    source: ParamSource,
    current: Option<Vec<f64>>,
}

impl ParamProcess {
    pub fn new(dist: ParamDistribution, source: ParamSource) -> Self {
        Self {
            dist,
            source,
            current: None,
        }
    }

    pub fn distribution(&self) -> &ParamDistribution {
        &self.dist
    }

    pub fn source(&self) -> ParamSource {
        self.source
    }

    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<f64>> {
        let p = match (&self.current, self.source) {
            (None, _) | (Some(_), ParamSource::Iid) => self.dist.sample(rng)?,
            (Some(cur), ParamSource::Drift { step_bound }) => parameter_process_next(cur, step_bound, &self.dist, rng)?,
        };
        self.current = Some(p.clone());
        Ok(p)
    }
}

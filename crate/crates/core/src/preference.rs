//! Preference functions and the exact metric over finite supports.
//!
//! A preference function `W: [0, 1] -> [0, inf)` is non-increasing and
//! integrates to 1. Given returns with masses, entries are sorted ascending
//! and the entry occupying the cumulative-mass interval `[M, M + m]` receives
//! weight `integral_M^{M+m} W(x) dx`. The metric is the weighted sum of the
//! returns.

use alloc::format;
use alloc::vec::Vec;

// inherent float methods shadow these in some builds
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// A non-increasing preference function on `[0, 1]`, normalized to unit
/// integral.
#[derive(Debug, Clone, PartialEq)]
pub enum PreferenceSpec {
    /// `W(x) = (k + 1) (1 - x)^k`. `k = inf` is the Dirac mass at 0, whose
    /// metric is the lowest return.
    Power { k: f64 },
    /// Piecewise-linear interpolation of knots spanning `[0, 1]`.
    Tabulated { xs: Vec<f64>, ws: Vec<f64> },
}

impl PreferenceSpec {
    pub fn power(k: f64) -> Result<Self> {
        if k.is_nan() || k < 0.0 {
            return Err(Error::invalid(format!(
                "robustness degree must be nonnegative, got {k}"
            )));
        }
        Ok(PreferenceSpec::Power { k })
    }

    /// The worst-case limit.
    pub fn dirac() -> Self {
        PreferenceSpec::Power { k: f64::INFINITY }
    }

    /// Builds a tabulated preference from `(x, w)` knots. The knots must start
    /// at 0, end at 1, be strictly ascending in `x` and non-increasing and
    /// nonnegative in `w`. Weights are rescaled to unit integral.
    pub fn tabulated(knots: &[(f64, f64)]) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::invalid("tabulated preference needs at least two knots"));
        }
        if knots.iter().any(|(x, w)| !x.is_finite() || !w.is_finite()) {
            return Err(Error::invalid("tabulated knots must be finite"));
        }
        if knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
            return Err(Error::invalid("tabulated knots must start at x = 0 and end at x = 1"));
        }
        for pair in knots.windows(2) {
            let ((x0, w0), (x1, w1)) = (pair[0], pair[1]);
            if !(x1 > x0) {
                return Err(Error::invalid("tabulated knots must be strictly ascending in x"));
            }
            if w1 > w0 {
                return Err(Error::invalid(format!(
                    "preference must be non-increasing: w({x1}) = {w1} > w({x0}) = {w0}"
                )));
            }
        }
        if knots.iter().any(|(_, w)| *w < 0.0) {
            return Err(Error::invalid("preference weights must be nonnegative"));
        }
        let xs: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let raw: Vec<f64> = knots.iter().map(|k| k.1).collect();
        let total = trapezoid(&xs, &raw, 0.0, 1.0);
        if !(total > 0.0) {
            return Err(Error::invalid("tabulated preference integrates to zero"));
        }
        let ws = raw.iter().map(|w| w / total).collect();
        Ok(PreferenceSpec::Tabulated { xs, ws })
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self, PreferenceSpec::Power { k } if k.is_infinite())
    }

    /// `W(x)`.
    pub fn weight_value(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::invalid(format!("preference argument {x} outside [0, 1]")));
        }
        Ok(match self {
            PreferenceSpec::Power { k } if k.is_infinite() => {
                if x == 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            PreferenceSpec::Power { k } => (k + 1.0) * (1.0 - x).powf(*k),
            PreferenceSpec::Tabulated { xs, ws } => interpolate(xs, ws, x),
        })
    }

    /// `W(0)`, the supremum of a non-increasing preference.
    pub fn sup(&self) -> f64 {
        self.weight_value(0.0).unwrap_or(f64::INFINITY)
    }

    /// `integral_a^b W(x) dx` in closed form.
    pub fn weight_integral(&self, a: f64, b: f64) -> Result<f64> {
        if a.is_nan() || b.is_nan() || a < 0.0 || b > 1.0 {
            return Err(Error::invalid(format!("integration bounds ({a}, {b}) outside [0, 1]")));
        }
        if a > b {
            return Err(Error::invalid(format!("integration bounds reversed: {a} > {b}")));
        }
        Ok(match self {
            PreferenceSpec::Power { k } if k.is_infinite() => {
                if a == 0.0 && b > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            PreferenceSpec::Power { k } => {
                let e = k + 1.0;
                ((1.0 - a).powf(e) - (1.0 - b).powf(e)).max(0.0)
            }
            PreferenceSpec::Tabulated { xs, ws } => trapezoid(xs, ws, a, b),
        })
    }
}

fn interpolate(xs: &[f64], ws: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|&k| k <= x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let t = (x - x0) / (x1 - x0);
    ws[i - 1] + t * (ws[i] - ws[i - 1])
}

/// Exact integral of the piecewise-linear interpolant over `[a, b]`.
fn trapezoid(xs: &[f64], ws: &[f64], a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    for i in 1..xs.len() {
        let lo = xs[i - 1].max(a);
        let hi = xs[i].min(b);
        if hi > lo {
            let wl = interpolate(xs, ws, lo);
            let wh = interpolate(xs, ws, hi);
            total += 0.5 * (hi - lo) * (wl + wh);
        }
    }
    total
}

/// One ranked return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    pub value: f64,
    pub mass: f64,
    pub weight: f64,
    /// Index of the unit (block, cluster, atom) in the caller's input order.
    pub source_id: usize,
    /// Cumulative mass of all entries ranked before this one.
    pub prefix: f64,
}

impl LedgerEntry {
    /// Upper end of the entry's cumulative-mass interval.
    pub fn cumulative_mass(&self) -> f64 {
        self.prefix + self.mass
    }
}

/// Returns sorted ascending (ties by source id) with masses and weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedLedger {
    entries: Vec<LedgerEntry>,
}

impl RankedLedger {
    /// Builds a ledger from entries already in rank order. The caller is
    /// responsible for the ordering and prefix invariants.
    pub fn from_sorted(entries: Vec<LedgerEntry>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.mass).sum()
    }

    /// `sum w_j J_j`.
    pub fn weighted_value(&self) -> f64 {
        self.entries.iter().map(|e| e.weight * e.value).sum()
    }

    /// Discrete ranking value of entry `index`: the mass of all entries whose
    /// return does not exceed its return.
    pub fn ranking(&self, index: usize) -> f64 {
        let v = self.entries[index].value;
        self.entries.iter().filter(|e| e.value <= v).map(|e| e.mass).sum()
    }

    /// Index of the last entry carrying mass; its interval is closed at 1.
    fn last_massive(&self) -> Option<usize> {
        self.entries.iter().rposition(|e| e.mass > 0.0)
    }

    /// Sets each entry's weight to the preference integral over its
    /// cumulative-mass interval.
    pub fn assign_weights(&mut self, pref: &PreferenceSpec) -> Result<()> {
        let last = self.last_massive();
        for (i, e) in self.entries.iter_mut().enumerate() {
            let (a, b) = match last {
                Some(l) if i > l => (1.0, 1.0),
                Some(l) if i == l => (e.prefix.min(1.0), 1.0),
                _ => (e.prefix.min(1.0), (e.prefix + e.mass).min(1.0)),
            };
            e.weight = pref.weight_integral(a, b)?;
        }
        Ok(())
    }
}

/// Checks `(J, mass)` pairs and returns the normalized masses.
pub(crate) fn validated_masses(returns: &[(f64, f64)]) -> Result<Vec<f64>> {
    if returns.is_empty() {
        return Err(Error::invalid("cannot rank an empty set of returns"));
    }
    if returns.iter().any(|(j, _)| j.is_nan()) {
        return Err(Error::invalid("return values must not be NaN"));
    }
    if returns.iter().any(|(_, m)| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::invalid("masses must be finite and nonnegative"));
    }
    let total: f64 = returns.iter().map(|(_, m)| m).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("masses sum to {total}, expected 1")));
    }
    Ok(returns.iter().map(|(_, m)| m / total).collect())
}

/// Sorts `(J, mass)` pairs ascending by return, ties kept in input order.
/// Weights are left at zero.
pub fn rank(returns: &[(f64, f64)]) -> Result<RankedLedger> {
    let masses = validated_masses(returns)?;
    let mut order: Vec<usize> = (0..returns.len()).collect();
    order.sort_by(|&a, &b| returns[a].0.total_cmp(&returns[b].0));
    let mut prefix = 0.0;
    let entries = order
        .into_iter()
        .map(|i| {
            let e = LedgerEntry {
                value: returns[i].0,
                mass: masses[i],
                weight: 0.0,
                source_id: i,
                prefix,
            };
            prefix += masses[i];
            e
        })
        .collect();
    Ok(RankedLedger { entries })
}

/// The metric of a finitely supported parameter distribution: rank the
/// returns, weight each by the preference integral over its mass interval and
/// sum.
pub fn exact_metric(returns: &[(f64, f64)], pref: &PreferenceSpec) -> Result<(f64, RankedLedger)> {
    let mut ledger = rank(returns)?;
    ledger.assign_weights(pref)?;
    Ok((ledger.weighted_value(), ledger))
}

/// Equal-mass metric over raw samples, `exact_metric` with mass `1/n` each.
pub fn equal_mass_metric(values: &[f64], pref: &PreferenceSpec) -> Result<(f64, RankedLedger)> {
    let m = 1.0 / values.len().max(1) as f64;
    let pairs: Vec<(f64, f64)> = values.iter().map(|&v| (v, m)).collect();
    exact_metric(&pairs, pref)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn power(k: f64) -> PreferenceSpec {
        PreferenceSpec::power(k).unwrap()
    }

    #[test]
    fn power_values() {
        assert_eq!(power(0.0).weight_value(0.37).unwrap(), 1.0);
        assert_eq!(power(1.0).weight_value(0.0).unwrap(), 2.0);
        assert_eq!(power(1.0).weight_value(1.0).unwrap(), 0.0);
        // 22 * 0.9^21 by repeated multiplication
        let mut oracle = 22.0;
        for _ in 0..21 {
            oracle *= 0.9;
        }
        let v = power(21.0).weight_value(0.1).unwrap();
        assert!((v - oracle).abs() < 1e-12);
        assert!((v - 2.41).abs() < 0.005);
    }

    #[test]
    fn weight_value_rejects_out_of_range() {
        assert!(power(1.0).weight_value(1.5).is_err());
        assert!(power(1.0).weight_value(-0.1).is_err());
    }

    #[test]
    fn power_integrals() {
        assert!((power(1.0).weight_integral(0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((power(1.0).weight_integral(0.0, 0.5).unwrap() - 0.75).abs() < 1e-15);
        assert!((power(0.0).weight_integral(0.2, 0.7).unwrap() - 0.5).abs() < 1e-15);
        assert!(power(1.0).weight_integral(0.6, 0.5).is_err());
    }

    #[test]
    fn rejects_negative_k() {
        assert!(PreferenceSpec::power(-1.0).is_err());
        assert!(PreferenceSpec::power(f64::NAN).is_err());
    }

    #[test]
    fn tabulated_normalizes_and_integrates() {
        let p = PreferenceSpec::tabulated(&[(0.0, 4.0), (0.5, 2.0), (1.0, 0.0)]).unwrap();
        assert!((p.weight_integral(0.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        // raw integral is 2, so W = 2 - 2x after normalization
        assert!((p.weight_value(0.25).unwrap() - 1.5).abs() < 1e-12);
        assert!((p.weight_integral(0.0, 0.5).unwrap() - 0.75).abs() < 1e-12);
        assert!((p.weight_integral(0.25, 0.75).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tabulated_rejects_increasing() {
        assert!(PreferenceSpec::tabulated(&[(0.0, 1.0), (0.5, 2.0), (1.0, 0.0)]).is_err());
        assert!(PreferenceSpec::tabulated(&[(0.1, 1.0), (1.0, 0.0)]).is_err());
    }

    #[test]
    fn rank_prefixes_and_ranking() {
        let l = rank(&[(2.0, 0.25), (5.0, 0.25), (5.0, 0.25), (9.0, 0.25)]).unwrap();
        let prefixes: Vec<f64> = l.entries().iter().map(|e| e.prefix).collect();
        assert_eq!(prefixes, vec![0.0, 0.25, 0.5, 0.75]);
        assert_eq!(l.ranking(0), 0.25);
        assert_eq!(l.ranking(1), 0.75);
        assert_eq!(l.ranking(2), 0.75);

        let single = rank(&[(3.0, 1.0)]).unwrap();
        assert_eq!(single.entries()[0].prefix, 0.0);
        assert_eq!(single.ranking(0), 1.0);
    }

    #[test]
    fn rank_keeps_sorted_input_and_breaks_ties_by_source() {
        let l = rank(&[(1.0, 0.2), (2.0, 0.3), (3.0, 0.5)]).unwrap();
        let ids: Vec<usize> = l.entries().iter().map(|e| e.source_id).collect();
        assert_eq!(ids, vec![0, 1, 2]);
        let l = rank(&[(4.0, 0.5), (1.0, 0.25), (4.0, 0.25)]).unwrap();
        let ids: Vec<usize> = l.entries().iter().map(|e| e.source_id).collect();
        assert_eq!(ids, vec![1, 0, 2]);
    }

    #[test]
    fn rank_rejects_nan_and_bad_masses() {
        assert!(rank(&[(f64::NAN, 1.0)]).is_err());
        assert!(rank(&[(1.0, 0.5)]).is_err());
        assert!(rank(&[(1.0, -0.5), (2.0, 1.5)]).is_err());
    }

    #[test]
    fn exact_metric_examples() {
        let (v, l) = exact_metric(&[(1.0, 0.5), (3.0, 0.5)], &power(1.0)).unwrap();
        assert!((v - 1.5).abs() < 1e-12);
        assert!((l.entries()[0].weight - 0.75).abs() < 1e-15);
        assert!((l.entries()[1].weight - 0.25).abs() < 1e-15);

        let data = [(10.0, 0.2), (-2.0, 0.3), (4.0, 0.5)];
        let (v, l) = exact_metric(&data, &power(1.0)).unwrap();
        let w: Vec<f64> = l.entries().iter().map(|e| e.weight).collect();
        for (a, b) in w.iter().zip([0.51, 0.45, 0.04]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((v - 1.18).abs() < 1e-12);

        let (v, _) = exact_metric(&data, &power(0.0)).unwrap();
        assert!((v - 3.4).abs() < 1e-12);
    }

    #[test]
    fn dirac_returns_lowest_massive_return() {
        let (v, l) = exact_metric(&[(5.0, 0.3), (-1.0, 0.0), (2.0, 0.7)], &PreferenceSpec::dirac()).unwrap();
        assert_eq!(v, 2.0);
        assert_eq!(l.total_weight(), 1.0);
    }

    #[test]
    fn zero_mass_entries_get_zero_weight() {
        let (_, l) = exact_metric(&[(1.0, 0.5), (2.0, 0.5), (3.0, 0.0)], &power(0.0)).unwrap();
        assert_eq!(l.entries()[2].weight, 0.0);
        assert!((l.total_weight() - 1.0).abs() < 1e-15);
    }
}

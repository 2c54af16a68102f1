#![allow(dead_code)]

/// Power-preference metric written out from scratch: sort by return, then
/// weight each entry by `(1 - a)^(k+1) - (1 - b)^(k+1)` over its cumulative
/// mass interval `[a, b]`.
pub fn power_metric(pairs: &[(f64, f64)], k: f64) -> f64 {
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let total: f64 = sorted.iter().map(|p| p.1).sum();
    let mut a = 0.0;
    let mut value = 0.0;
    for (j, m) in sorted {
        let b = (a + m / total).min(1.0);
        value += j * ((1.0 - a).powf(k + 1.0) - (1.0 - b).powf(k + 1.0));
        a = b;
    }
    // whatever rounding left over belongs to the top of the ranking
    value + pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max) * (1.0 - a).powf(k + 1.0)
}

/// Midpoint quadrature of `integral_0^1 W(x) q(x) dx` with `q` the quantile
/// function of the discrete return distribution.
pub fn quadrature_metric(pairs: &[(f64, f64)], k: f64, n: usize) -> f64 {
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut cum = Vec::with_capacity(sorted.len());
    let mut acc = 0.0;
    for (_, m) in &sorted {
        acc += m;
        cum.push(acc);
    }
    let h = 1.0 / n as f64;
    (0..n)
        .map(|i| {
            let x = (i as f64 + 0.5) * h;
            let idx = cum.iter().position(|&c| c >= x).unwrap_or(sorted.len() - 1);
            (k + 1.0) * (1.0 - x).powf(k) * sorted[idx].0 * h
        })
        .sum()
}

pub fn normalize(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.iter().map(|m| m / total).collect()
}

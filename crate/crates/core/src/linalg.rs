//! Dense linear solve used by the exact return oracle.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Solves `a * x = b` for a square row-major `a` by Gaussian elimination with
/// partial pivoting. Fails when a pivot vanishes or the residual
/// `max |a x - b|` exceeds `residual_tol`.
pub fn solve(a: &[f64], b: &[f64], residual_tol: f64) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n * n {
        return Err(Error::invalid("matrix shape does not match right-hand side"));
    }
    let mut m = a.to_vec();
    let mut x = b.to_vec();

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap_or(col);
        if m[pivot * n + col].abs() < 1e-300 {
            return Err(Error::numerical("singular linear system"));
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            x.swap(col, pivot);
        }
        let diag = m[col * n + col];
        for row in col + 1..n {
            let factor = m[row * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= factor * m[col * n + k];
            }
            x[row] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for k in col + 1..n {
            acc -= m[col * n + k] * x[k];
        }
        x[col] = acc / m[col * n + col];
    }

    let residual = (0..n)
        .map(|i| {
            let ax: f64 = (0..n).map(|k| a[i * n + k] * x[k]).sum();
            (ax - b[i]).abs()
        })
        .fold(0.0, f64::max);
    if !(residual <= residual_tol) {
        return Err(Error::numerical("linear solve residual above tolerance"));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn solves_small_system_with_pivoting() {
        // needs a row swap: first pivot is zero
        let a = [0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 2.0, 0.0, 1.0];
        let x_true = [1.0, -2.0, 3.0];
        let b: Vec<f64> = (0..3).map(|i| (0..3).map(|k| a[i * 3 + k] * x_true[k]).sum()).collect();
        let x = solve(&a, &b, 1e-12).unwrap();
        for (u, v) in x.iter().zip(x_true) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = vec![1.0, 2.0, 2.0, 4.0];
        assert!(matches!(
            solve(&a, &[1.0, 2.0], 1e-10),
            Err(Error::NumericalFailure { .. })
        ));
    }
}

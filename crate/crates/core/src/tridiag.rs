//! Banded solvers for the one-dimensional operators.

use crate::error::{Error, Result};

/// Tridiagonal system `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
/// `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::Convergence("singular tridiagonal system".into()));
    }
    x[0] = rhs[0] / beta;
    for i in 1..n {
        c[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i];
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::Convergence("singular tridiagonal system".into()));
        }
        x[i] = (rhs[i] - lower[i] * x[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i + 1] * x[i + 1];
    }
    Ok(x)
}

/// Cyclic tridiagonal system; `lower[0]` couples to `x[n-1]` and `upper[n-1]` to `x[0]`.
pub fn solve_cyclic(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n < 3 {
        return Err(Error::Config("cyclic system needs at least 3 unknowns".into()));
    }
    let alpha = upper[n - 1];
    let beta = lower[0];
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(lower, &d, upper, rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(lower, &d, upper, &u)?;
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    Ok(x.iter().zip(&z).map(|(a, b)| a - fact * b).collect())
}

/// `y = A x` for a (possibly cyclic) tridiagonal matrix.
pub fn tridiagonal_apply(lower: &[f64], diag: &[f64], upper: &[f64], x: &[f64], cyclic: bool) -> Vec<f64> {
    let n = diag.len();
    (0..n)
        .map(|i| {
            let mut v = diag[i] * x[i];
            if i > 0 {
                v += lower[i] * x[i - 1];
            } else if cyclic {
                v += lower[0] * x[n - 1];
            }
            if i + 1 < n {
                v += upper[i] * x[i + 1];
            } else if cyclic {
                v += upper[n - 1] * x[0];
            }
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn tridiagonal_solution_reproduces_rhs(
            vals in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 3..40),
            cyclic in any::<bool>(),
        ) {
            let n = vals.len();
            let lower: Vec<f64> = vals.iter().map(|v| v.0).collect();
            let upper: Vec<f64> = vals.iter().map(|v| v.1).collect();
            // diagonally dominant
            let diag: Vec<f64> = vals.iter().map(|v| 3.0 + v.2).collect();
            let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let x = if cyclic {
                solve_cyclic(&lower, &diag, &upper, &rhs).unwrap()
            } else {
                solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap()
            };
            let back = tridiagonal_apply(&lower, &diag, &upper, &x, cyclic);
            for (a, b) in back.iter().zip(&rhs) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

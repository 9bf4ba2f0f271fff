//! Least squares via Householder QR, with an SVD fallback that returns the
//! minimum-norm solution when the design matrix is rank deficient.
//!
//! Degenerate neighborhoods (duplicated points, collapsed coordinates) must
//! not abort an estimation run, so rank deficiency is not an error here.

use super::matrix::Matrix;
use super::svd::one_sided_jacobi;
use crate::error::{Error, Result};

/// Solution of `min ||X b - y||` together with the detected rank of `X`.
#[derive(Debug, Clone)]
pub struct LeastSquaresSolution {
    pub coefficients: Vec<f64>,
    pub rank: usize,
}

/// Minimum-norm least-squares solution of an `m x k` system, `m >= k`.
///
/// Full-rank systems go through plain Householder QR; if the triangular
/// factor looks rank deficient the solve is redone from an SVD, which yields
/// the minimum-norm solution.
pub fn least_squares_solve(x: &Matrix, y: &[f64]) -> Result<LeastSquaresSolution> {
    let m = x.rows();
    let k = x.cols();
    if m < k {
        return Err(Error::InvalidInput(format!(
            "least squares needs rows >= cols, got {m}x{k}"
        )));
    }
    if y.len() != m {
        return Err(Error::InvalidInput(format!(
            "response length {} does not match {m} rows",
            y.len()
        )));
    }
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("response must be finite".into()));
    }

    if let Some(solution) = qr_solve(x, y) {
        return Ok(solution);
    }
    Ok(svd_min_norm_solve(x, y))
}

/// Householder QR solve. Returns `None` when `R` is too ill conditioned to
/// trust a triangular back-substitution.
fn qr_solve(x: &Matrix, y: &[f64]) -> Option<LeastSquaresSolution> {
    let m = x.rows();
    let k = x.cols();
    let mut a = x.clone();
    let mut rhs = y.to_vec();

    for col in 0..k {
        let mut norm2 = 0.0;
        for r in col..m {
            norm2 += a.get(r, col) * a.get(r, col);
        }
        let norm = norm2.sqrt();
        if norm == 0.0 {
            return None; // structurally rank deficient
        }
        let pivot = a.get(col, col);
        let alpha = if pivot > 0.0 { -norm } else { norm };
        let mut v = vec![0.0; m - col];
        v[0] = pivot - alpha;
        for r in (col + 1)..m {
            v[r - col] = a.get(r, col);
        }
        let vtv: f64 = v.iter().map(|t| t * t).sum();
        if vtv < f64::MIN_POSITIVE {
            a.set(col, col, alpha);
            continue;
        }
        let beta = 2.0 / vtv;
        // Apply reflector to the trailing columns.
        for c in col..k {
            let mut dot = 0.0;
            for r in col..m {
                dot += v[r - col] * a.get(r, c);
            }
            let scale = beta * dot;
            for r in col..m {
                let val = a.get(r, c) - scale * v[r - col];
                a.set(r, c, val);
            }
        }
        // And to the right-hand side.
        let mut dot = 0.0;
        for r in col..m {
            dot += v[r - col] * rhs[r];
        }
        let scale = beta * dot;
        for r in col..m {
            rhs[r] -= scale * v[r - col];
        }
    }

    // Condition screen on the diagonal of R.
    let mut max_diag = 0.0_f64;
    let mut min_diag = f64::INFINITY;
    for i in 0..k {
        let d = a.get(i, i).abs();
        max_diag = max_diag.max(d);
        min_diag = min_diag.min(d);
    }
    if min_diag <= max_diag * (m.max(k) as f64) * f64::EPSILON * 16.0 {
        return None;
    }

    let mut beta = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = rhs[i];
        for j in (i + 1)..k {
            s -= a.get(i, j) * beta[j];
        }
        beta[i] = s / a.get(i, i);
    }
    Some(LeastSquaresSolution {
        coefficients: beta,
        rank: k,
    })
}

/// Minimum-norm solve through the one-sided Jacobi SVD: with `A = W V^T`
/// (`w_i = sigma_i u_i`), the pseudoinverse solution is
/// `b = sum_{sigma_i > tol} v_i (w_i . y) / sigma_i^2`.
fn svd_min_norm_solve(x: &Matrix, y: &[f64]) -> LeastSquaresSolution {
    let k = x.cols();
    let svd = one_sided_jacobi(x);
    let sigma_max = svd
        .singular_values
        .iter()
        .fold(0.0_f64, |acc, s| acc.max(*s));
    let tol = sigma_max * (x.rows().max(k) as f64) * f64::EPSILON;

    let mut beta = vec![0.0; k];
    let mut rank = 0;
    for i in 0..k {
        let sigma = svd.singular_values[i];
        if sigma <= tol || sigma == 0.0 {
            continue;
        }
        rank += 1;
        let wy: f64 = svd.w[i].iter().zip(y).map(|(a, b)| a * b).sum();
        let factor = wy / (sigma * sigma);
        for (b, v) in beta.iter_mut().zip(&svd.v[i]) {
            *b += factor * v;
        }
    }
    LeastSquaresSolution {
        coefficients: beta,
        rank,
    }
}

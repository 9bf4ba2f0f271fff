//! Symmetric eigendecomposition via the cyclic Jacobi method.
//!
//! Jacobi is slower than tridiagonalization-based solvers for large matrices
//! but is compact, very accurate, and the matrices here never exceed the
//! ambient dimension (a few tens of rows), where it is entirely adequate.

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Eigenvalues (descending) and an orthonormal eigenvector per eigenvalue.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Sorted non-increasing: `eigenvalues[0] >= eigenvalues[1] >= ...`
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the eigenvector for `eigenvalues[i]`.
    pub eigenvectors: Matrix,
}

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
///
/// The input is symmetrized as `(S + S^T)/2` before iteration, so slight
/// asymmetry from accumulated rounding is tolerated. Eigenvector signs are
/// fixed by making the largest-magnitude component of each vector positive,
/// which keeps results reproducible across runs.
pub fn sym_eigen_desc(s: &Matrix) -> Result<EigenDecomposition> {
    let n = s.rows();
    if s.cols() != n {
        return Err(Error::InvalidInput(format!(
            "expected a square matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }

    // Symmetrized working copy.
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a.set(i, j, 0.5 * (s.get(i, j) + s.get(j, i)));
        }
    }
    let mut v = Matrix::identity(n);

    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let tol = 1e-15 * scale;

    const MAX_SWEEPS: usize = 60;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a.get(i, j).abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s_rot = t * c;

                // Rotate rows/columns p and q of `a`.
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s_rot * akq);
                    a.set(k, q, s_rot * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s_rot * aqk);
                    a.set(q, k, s_rot * apk + c * aqk);
                }
                // Accumulate the rotation into the eigenvector matrix.
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s_rot * vkq);
                    v.set(k, q, s_rot * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps index order on ties, which fixes the permutation.
    order.sort_by(|&i, &j| a.get(j, j).partial_cmp(&a.get(i, i)).unwrap());

    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues.push(a.get(src, src));
        // Sign fix: largest-magnitude component made positive.
        let col: Vec<f64> = (0..n).map(|k| v.get(k, src)).collect();
        let mut arg = 0;
        for (k, x) in col.iter().enumerate() {
            if x.abs() > col[arg].abs() {
                arg = k;
            }
        }
        let flip = if col[arg] < 0.0 { -1.0 } else { 1.0 };
        for (k, x) in col.iter().enumerate() {
            eigenvectors.set(k, dst, flip * x);
        }
    }

    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

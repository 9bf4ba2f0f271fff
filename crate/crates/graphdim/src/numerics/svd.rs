//! Singular-value kernels.
//!
//! `smallest_singular_value` goes through the Gram matrix: tridiagonalize
//! `A^T A` with Householder reflections, then bisect for its smallest
//! eigenvalue using Sturm sign counts. For the tall-and-narrow matrices the
//! TLS estimator produces this is an order of magnitude cheaper than a full
//! SVD and accurate to ~1e-15 * ||A||^2 in the eigenvalue, i.e. within the
//! 1e-8 * ||A|| contract on the singular value.
//!
//! A compact one-sided Jacobi SVD is kept alongside for the rank-deficient
//! least-squares path, where the full factorization is actually needed.

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Smallest singular value of an `m x k` matrix with `m >= k`.
pub fn smallest_singular_value(a: &Matrix) -> Result<f64> {
    if a.rows() < a.cols() {
        return Err(Error::InvalidInput(format!(
            "need at least as many rows as columns, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let gram = a.gram();
    let lambda_min = tridiag_min_eigenvalue(&gram);
    let scale = gram.max_abs();
    // Forming A^T A floors the resolvable eigenvalue at ~eps * ||G||, i.e.
    // sigma at ~sqrt(eps) * ||A||, short of the 1e-8 * ||A|| contract for
    // near-singular input. Recover the lost digits by extracting the
    // eigenvector with inverse iteration and measuring ||A v|| directly.
    if lambda_min <= 1e-8 * scale {
        let v = inverse_iteration(&gram, lambda_min.max(0.0));
        let av = a.matvec(&v);
        return Ok(av.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    Ok(lambda_min.max(0.0).sqrt())
}

/// Eigenvector of `g` for the eigenvalue nearest `shift`, via inverse
/// iteration with dense partially-pivoted elimination. The shifted matrix is
/// numerically singular by construction; tiny pivots are replaced rather
/// than failed, which is exactly what drives the iteration toward the
/// eigenvector.
fn inverse_iteration(g: &Matrix, shift: f64) -> Vec<f64> {
    let k = g.rows();
    let mut v = vec![1.0 / (k as f64).sqrt(); k];
    for _ in 0..3 {
        let mut w = solve_shifted(g, shift, &v);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            break;
        }
        for x in &mut w {
            *x /= norm;
        }
        v = w;
    }
    v
}

/// Solves `(g - shift I) x = b` by Gaussian elimination with partial
/// pivoting, substituting a tiny value for exactly-zero pivots.
fn solve_shifted(g: &Matrix, shift: f64, b: &[f64]) -> Vec<f64> {
    let k = g.rows();
    let mut a: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut row: Vec<f64> = (0..k).map(|j| g.get(i, j)).collect();
            row[i] -= shift;
            row
        })
        .collect();
    let mut x = b.to_vec();
    let tiny = g.max_abs().max(f64::MIN_POSITIVE) * 1e-30;
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        x.swap(col, piv);
        if a[col][col] == 0.0 {
            a[col][col] = tiny;
        }
        let p = a[col][col];
        for r in (col + 1)..k {
            let f = a[r][col] / p;
            if f == 0.0 {
                continue;
            }
            for c in (col + 1)..k {
                a[r][c] -= f * a[col][c];
            }
            x[r] -= f * x[col];
        }
    }
    for i in (0..k).rev() {
        let mut s = x[i];
        for j in (i + 1)..k {
            s -= a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
    }
    x
}

/// Smallest eigenvalue of a symmetric matrix via Householder
/// tridiagonalization plus Sturm-count bisection.
pub(crate) fn tridiag_min_eigenvalue(g: &Matrix) -> f64 {
    let n = g.rows();
    debug_assert_eq!(n, g.cols());
    if n == 1 {
        return g.get(0, 0);
    }
    let (diag, off) = householder_tridiagonalize(g);
    bisect_min_eigenvalue(&diag, &off)
}

/// Reduces a symmetric matrix to tridiagonal form, returning the diagonal and
/// off-diagonal. Eigenvectors are not accumulated.
fn householder_tridiagonalize(g: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = g.rows();
    let mut a: Vec<f64> = g.data().to_vec();
    let at = |a: &[f64], i: usize, j: usize| a[i * n + j];

    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];

    for k in 0..n.saturating_sub(2) {
        // Householder vector annihilating column k below the subdiagonal.
        let mut alpha: f64 = 0.0;
        for i in (k + 1)..n {
            alpha += at(&a, i, k) * at(&a, i, k);
        }
        alpha = alpha.sqrt();
        let akk1 = at(&a, k + 1, k);
        if akk1 > 0.0 {
            alpha = -alpha;
        }
        diag[k] = at(&a, k, k);
        off[k] = alpha;
        let r2 = alpha * alpha - akk1 * alpha;
        if r2.abs() < f64::MIN_POSITIVE || alpha == 0.0 {
            // Column already tridiagonal here.
            continue;
        }
        for i in 0..=k {
            v[i] = 0.0;
        }
        v[k + 1] = akk1 - alpha;
        for i in (k + 2)..n {
            v[i] = at(&a, i, k);
        }
        let beta = 1.0 / r2;

        // w = beta * A v ; tau = beta/2 * v^T w ; A <- A - v w' - w v'
        // with w' = w - tau v (symmetric rank-2 update). Only the trailing
        // submatrix participates, so earlier rows are skipped.
        for i in (k + 1)..n {
            let mut s = 0.0;
            for j in (k + 1)..n {
                s += at(&a, i, j) * v[j];
            }
            w[i] = beta * s;
        }
        for wi in w.iter_mut().take(k + 1) {
            *wi = 0.0;
        }
        let tau: f64 = 0.5 * beta * v.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>();
        for i in 0..n {
            w[i] -= tau * v[i];
        }
        for i in (k + 1)..n {
            for j in (k + 1)..=i {
                let upd = a[i * n + j] - v[i] * w[j] - w[i] * v[j];
                a[i * n + j] = upd;
                a[j * n + i] = upd;
            }
        }
    }
    if n >= 2 {
        diag[n - 2] = at(&a, n - 2, n - 2);
        off[n - 2] = at(&a, n - 1, n - 2);
    }
    diag[n - 1] = at(&a, n - 1, n - 1);
    (diag, off)
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`,
/// via the standard LDL^T sign-count recurrence.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let n = diag.len();
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let e = off[i - 1];
        let denom = if q.abs() < f64::MIN_POSITIVE {
            f64::MIN_POSITIVE.copysign(if q.is_sign_negative() { -1.0 } else { 1.0 })
        } else {
            q
        };
        q = diag[i] - x - e * e / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn bisect_min_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    // Gershgorin bounds.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut radius = 0.0;
        if i > 0 {
            radius += off[i - 1].abs();
        }
        if i < n - 1 {
            radius += off[i].abs();
        }
        lo = lo.min(diag[i] - radius);
        hi = hi.max(diag[i] + radius);
    }
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let pad = 1e-15 * scale;
    let mut lo = lo - pad;
    let mut hi = hi + pad;
    // Bisect down to floating-point resolution; the eigenvalue of an exactly
    // singular Gram matrix must come out at zero to within rounding, not at
    // the bracket tolerance.
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One-sided Jacobi SVD. After convergence the working columns are
/// `w_i = sigma_i * u_i` and `v` accumulates the right singular vectors, so
/// `A = W V^T` with orthogonal (unnormalized) `W`.
pub(crate) struct JacobiSvd {
    /// Column-major working copy of A, orthogonalized: `w[i]` is column i.
    pub w: Vec<Vec<f64>>,
    /// Right singular vectors, column-major: `v[i]` is column i.
    pub v: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
}

pub(crate) fn one_sided_jacobi(a: &Matrix) -> JacobiSvd {
    let m = a.rows();
    let k = a.cols();
    let mut w: Vec<Vec<f64>> = (0..k).map(|c| a.column(c)).collect();
    let mut v: Vec<Vec<f64>> = (0..k)
        .map(|c| (0..k).map(|r| if r == c { 1.0 } else { 0.0 }).collect())
        .collect();

    const TOL: f64 = 1e-13;
    const MAX_SWEEPS: usize = 40;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..k {
            for j in (i + 1)..k {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for r in 0..m {
                    alpha += w[i][r] * w[i][r];
                    beta += w[j][r] * w[j][r];
                    gamma += w[i][r] * w[j][r];
                }
                if gamma.abs() <= TOL * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..m {
                    let wi = w[i][r];
                    let wj = w[j][r];
                    w[i][r] = c * wi - s * wj;
                    w[j][r] = s * wi + c * wj;
                }
                for r in 0..k {
                    let vi = v[i][r];
                    let vj = v[j][r];
                    v[i][r] = c * vi - s * vj;
                    v[j][r] = s * vi + c * vj;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let singular_values = w
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    JacobiSvd {
        w,
        v,
        singular_values,
    }
}

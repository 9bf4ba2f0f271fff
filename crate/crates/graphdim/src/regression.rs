//! Quadratic feature expansion and the two fitting backends: OLS with
//! F-statistic / p-value / adjusted R-squared, and the TLS total orthogonal
//! error.
//!
//! For candidate dimension `j` the response is always the (j+1)-th PCA
//! coordinate; the predictors are the linear, square and cross-product terms
//! of the first `j` coordinates. The OLS design also carries an intercept:
//! PCA coordinates only approximate the theoretical chart, and the intercept
//! absorbs the centering error.

use crate::error::{Error, Result};
use crate::neighborhood::LocalChart;
use crate::numerics::{f_survival, least_squares_solve, smallest_singular_value, Matrix};

/// Relative tolerance below which a response column counts as constant,
/// measured against the spread of the first PCA coordinate. Matches the
/// default nonconstant-coordinate tolerance.
pub const CONSTANT_RESPONSE_REL_TOL: f64 = 1e-8;

/// Number of quadratic-model predictors for input dimension `j`:
/// `q_j = j(j-1)/2 + 2j` (j linear terms, j squares, j(j-1)/2 cross terms).
pub fn predictor_count(j: usize) -> usize {
    j * (j - 1) / 2 + 2 * j
}

/// One term of the quadratic feature expansion; indices are 0-based input
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureTerm {
    Linear(usize),
    Square(usize),
    /// Cross product of two distinct coordinates, `a < b`.
    Cross(usize, usize),
}

/// Fixed deterministic feature ordering: linear terms `x_1..x_j`, then
/// squares, then cross products `x_a * x_b` for `a < b` in lexicographic
/// order.
pub fn feature_term(j: usize, index: usize) -> FeatureTerm {
    if index < j {
        FeatureTerm::Linear(index)
    } else if index < 2 * j {
        FeatureTerm::Square(index - j)
    } else {
        let mut rest = index - 2 * j;
        for a in 0..j {
            let span = j - a - 1;
            if rest < span {
                return FeatureTerm::Cross(a, a + 1 + rest);
            }
            rest -= span;
        }
        panic!("feature index {index} out of range for j={j}");
    }
}

/// Inverse of [`feature_term`].
pub fn feature_index(j: usize, term: FeatureTerm) -> usize {
    match term {
        FeatureTerm::Linear(a) => a,
        FeatureTerm::Square(a) => j + a,
        FeatureTerm::Cross(a, b) => {
            debug_assert!(a < b && b < j);
            // Offset of the block of cross terms starting with coordinate a.
            let block: usize = (0..a).map(|t| j - t - 1).sum();
            2 * j + block + (b - a - 1)
        }
    }
}

/// Expands an input vector into its `q_j` quadratic features.
pub fn quadratic_features(x: &[f64]) -> Vec<f64> {
    let j = x.len();
    let mut out = Vec::with_capacity(predictor_count(j));
    out.extend_from_slice(x);
    out.extend(x.iter().map(|v| v * v));
    for a in 0..j {
        for b in (a + 1)..j {
            out.push(x[a] * x[b]);
        }
    }
    out
}

/// Per-(neighborhood, candidate-dimension) OLS fit statistics.
#[derive(Debug, Clone)]
pub struct QuadraticFit {
    /// Candidate dimension (number of input coordinates).
    pub j: usize,
    /// Number of predictors, `q_j`.
    pub predictors: usize,
    /// Number of samples, K+1.
    pub n_samples: usize,
    pub rss: f64,
    pub tss: f64,
    pub r2: f64,
    pub adj_r2: f64,
    /// Overall F statistic against the intercept-only model; infinite for an
    /// exact fit.
    pub f_stat: f64,
    pub p_value: f64,
}

/// Per-(neighborhood, candidate-dimension) TLS fit: the total orthogonal
/// error `sigma_{q_j}`.
#[derive(Debug, Clone)]
pub struct TlsFit {
    pub j: usize,
    /// Sum of squared orthogonal distances to the best-fit affine subspace of
    /// the augmented feature-response matrix.
    pub sigma: f64,
}

fn check_fit_preconditions(chart: &LocalChart, j: usize) -> Result<usize> {
    if j == 0 {
        return Err(Error::InvalidParameter(
            "candidate dimension must be at least 1".into(),
        ));
    }
    let p = chart.ambient_dim();
    if j + 1 > p {
        return Err(Error::InvalidParameter(format!(
            "response coordinate {} does not exist in ambient dimension {p}",
            j + 1
        )));
    }
    let q = predictor_count(j);
    let n = chart.n_points();
    if n < q + 2 {
        return Err(Error::InvalidParameter(format!(
            "quadratic fit for j={j} needs at least {} samples, chart has {n}",
            q + 2
        )));
    }
    Ok(q)
}

/// OLS quadratic regression of PCA coordinate `j+1` on the first `j`
/// coordinates, with overall-significance F test and adjusted R-squared.
///
/// A constant response (no variance relative to the first coordinate) yields
/// the vacuous-fit convention: `r2 = 0`, `adj_r2 = 0`, `p_value = 1`.
pub fn ols_quadratic(chart: &LocalChart, j: usize) -> Result<QuadraticFit> {
    let q = check_fit_preconditions(chart, j)?;
    let n = chart.n_points();

    let y = chart.coords.column(j);
    let y_mean: f64 = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    let y_std = (tss / (n - 1) as f64).sqrt();

    if y_std <= CONSTANT_RESPONSE_REL_TOL * chart.coord_std(0) {
        return Ok(QuadraticFit {
            j,
            predictors: q,
            n_samples: n,
            rss: 0.0,
            tss: 0.0,
            r2: 0.0,
            adj_r2: 0.0,
            f_stat: 0.0,
            p_value: 1.0,
        });
    }

    let mut design = Matrix::zeros(n, q + 1);
    for r in 0..n {
        design.set(r, 0, 1.0);
        let features = quadratic_features(&chart.coords.row(r)[..j]);
        for (c, v) in features.iter().enumerate() {
            design.set(r, c + 1, *v);
        }
    }
    let solution = least_squares_solve(&design, &y)?;
    let fitted = design.matvec(&solution.coefficients);
    let rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();

    let dof = n - q - 1;
    let r2 = 1.0 - rss / tss;
    let adj_r2 = 1.0 - (1.0 - r2) * (n - 1) as f64 / dof as f64;
    let f_stat = if rss > 0.0 {
        ((tss - rss).max(0.0) / q as f64) / (rss / dof as f64)
    } else {
        f64::INFINITY
    };
    let p_value = f_survival(f_stat, q, dof)?;

    Ok(QuadraticFit {
        j,
        predictors: q,
        n_samples: n,
        rss,
        tss,
        r2,
        adj_r2,
        f_stat,
        p_value,
    })
}

/// TLS quadratic fit: total orthogonal error of the centered augmented
/// matrix `[quadratic features of first j coords | coordinate j+1]`,
/// i.e. the square of its smallest singular value.
pub fn tls_quadratic(chart: &LocalChart, j: usize) -> Result<TlsFit> {
    let q = check_fit_preconditions(chart, j)?;
    let n = chart.n_points();

    let mut augmented = Matrix::zeros(n, q + 1);
    for r in 0..n {
        let features = quadratic_features(&chart.coords.row(r)[..j]);
        for (c, v) in features.iter().enumerate() {
            augmented.set(r, c, *v);
        }
        augmented.set(r, q, chart.coords.get(r, j));
    }
    // Centering realizes the *affine* best-fit subspace.
    augmented.center_columns();
    let sigma_min = smallest_singular_value(&augmented)?;
    Ok(TlsFit {
        j,
        sigma: sigma_min * sigma_min,
    })
}

/// Relative drops of a total-error sequence:
/// `eta_{j+1} = (sigma_j - sigma_{j+1}) / sigma_j`, with a zero drop when the
/// previous error is already zero.
pub fn relative_drops(sigmas: &[f64]) -> Vec<f64> {
    sigmas
        .windows(2)
        .map(|w| {
            if w[0] == 0.0 {
                0.0
            } else {
                (w[0] - w[1]) / w[0]
            }
        })
        .collect()
}

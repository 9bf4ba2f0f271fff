//! The QE and TLS intrinsic-dimension estimators, the per-neighborhood
//! candidate-dimension cap, and the Local PCA / TwoNN baselines.
//!
//! Both main estimators scan candidate dimensions `j` per neighborhood,
//! fitting a quadratic model of PCA coordinate `j+1` on the first `j`
//! coordinates. QE selects the smallest `j` whose fit (and every larger
//! fit) is significant under the F test, weighting by adjusted R-squared;
//! TLS selects the largest relative drop of the total orthogonal error.
//! Local estimates are computed independently per point and reduced in
//! index order, so parallel evaluation is bit-stable.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighborhood::{knn, local_chart, nonconstant_index, LocalChart, PointCloud};
use crate::regression::{ols_quadratic, relative_drops, tls_quadratic, QuadraticFit};

/// Tuning knobs shared by the estimators.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Neighborhood size K (the center is added on top).
    pub k: usize,
    /// p-value threshold for QE's F tests.
    pub alpha: f64,
    /// Relative tolerance declaring a PCA coordinate constant.
    pub rel_tol: f64,
    /// Local-PCA eigenvalue ratio threshold.
    pub pca_alpha: f64,
    /// Fraction of the largest neighbor-distance ratios TwoNN discards.
    pub twonn_trim: f64,
}

impl EstimatorConfig {
    pub const DEFAULT_ALPHA: f64 = 0.01;
    pub const DEFAULT_REL_TOL: f64 = 1e-8;
    pub const DEFAULT_PCA_ALPHA: f64 = 0.05;
    pub const DEFAULT_TWONN_TRIM: f64 = 0.1;

    pub fn new(k: usize) -> Self {
        EstimatorConfig {
            k,
            alpha: Self::DEFAULT_ALPHA,
            rel_tol: Self::DEFAULT_REL_TOL,
            pca_alpha: Self::DEFAULT_PCA_ALPHA,
            twonn_trim: Self::DEFAULT_TWONN_TRIM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::InvalidParameter(format!(
                "neighborhood size must be at least 3, got {}",
                self.k
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        if !self.rel_tol.is_finite() || self.rel_tol <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if !(self.pca_alpha > 0.0 && self.pca_alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "pca_alpha must lie in (0,1), got {}",
                self.pca_alpha
            )));
        }
        if !(0.0..0.5).contains(&self.twonn_trim) {
            return Err(Error::InvalidParameter(format!(
                "twonn_trim must lie in [0, 0.5), got {}",
                self.twonn_trim
            )));
        }
        Ok(())
    }
}

/// One neighborhood's dimension estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalEstimate {
    pub center_index: usize,
    /// Local dimension estimate, `1 <= d_k <= p`.
    pub d_k: usize,
    /// Adjusted R-squared of the selected QE model; fixed at 1 for TLS and
    /// the baselines; 0 marks QE's weightless fallback.
    pub weight: f64,
    /// False for skipped neighborhoods (degenerate chart, no feasible
    /// candidate dimension); such estimates are excluded from aggregation.
    pub valid: bool,
}

impl LocalEstimate {
    fn skipped(center_index: usize) -> Self {
        LocalEstimate {
            center_index,
            d_k: 0,
            weight: 0.0,
            valid: false,
        }
    }
}

/// Aggregated estimate over a whole cloud.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlobalEstimate {
    /// Possibly fractional dimension estimate.
    pub d_hat: f64,
    /// `d_hat` rounded to the nearest integer.
    pub d_rounded: usize,
    /// Number of neighborhoods that contributed.
    pub n_local: usize,
    /// Number of contributing neighborhoods with positive weight.
    pub n_weighted: usize,
}

/// Per-neighborhood cap on candidate dimensions.
///
/// A dimension `j` is feasible when the response coordinate `j+1` exists
/// (`j <= p-1`), the response is nonconstant (`j+1 <= q`, i.e. `j <= q-1`),
/// and the OLS fit keeps at least one residual degree of freedom
/// (`q_j + 1 <= K`, i.e. the largest feasible `m` satisfies
/// `m(m+3)/2 <= K-1`). Returns 0 when no candidate is feasible, which tells
/// the caller to skip the neighborhood.
pub fn pmax(p: usize, q: usize, k: usize) -> usize {
    if q <= 1 || p < 2 {
        return 0;
    }
    let mut m_star = 0;
    let mut m = 1;
    while m * (m + 3) / 2 <= k.saturating_sub(1) {
        m_star = m;
        m += 1;
    }
    m_star.min(p - 1).min(q - 1)
}

/// Full QE fit table for one neighborhood: one OLS fit per candidate
/// dimension `1..=pmax`. `None` when the neighborhood admits no candidate.
pub fn qe_fit_table(chart: &LocalChart, cfg: &EstimatorConfig) -> Option<Vec<QuadraticFit>> {
    let p = chart.ambient_dim();
    let q = nonconstant_index(chart, cfg.rel_tol);
    let p_max = pmax(p, q, cfg.k);
    if p_max < 1 {
        return None;
    }
    let mut fits = Vec::with_capacity(p_max);
    for j in 1..=p_max {
        match ols_quadratic(chart, j) {
            Ok(fit) => fits.push(fit),
            Err(_) => return None,
        }
    }
    Some(fits)
}

/// QE local estimate: the smallest `j` with positive adjusted R-squared whose
/// p-value, and every later candidate's p-value, beats `alpha`. Falls back to
/// `d_k = pmax` with weight zero when no candidate qualifies.
pub fn qe_local(chart: &LocalChart, cfg: &EstimatorConfig) -> LocalEstimate {
    let Some(fits) = qe_fit_table(chart, cfg) else {
        return LocalEstimate::skipped(chart.center_index);
    };
    let p_max = fits.len();

    // suffix_ok[i]: p-values of fits i.. all below alpha.
    let mut suffix_ok = vec![false; p_max + 1];
    suffix_ok[p_max] = true;
    for i in (0..p_max).rev() {
        suffix_ok[i] = suffix_ok[i + 1] && fits[i].p_value < cfg.alpha;
    }
    for fit in &fits {
        if fit.adj_r2 > 0.0 && suffix_ok[fit.j - 1] {
            return LocalEstimate {
                center_index: chart.center_index,
                d_k: fit.j,
                weight: fit.adj_r2,
                valid: true,
            };
        }
    }
    LocalEstimate {
        center_index: chart.center_index,
        d_k: p_max,
        weight: 0.0,
        valid: true,
    }
}

/// TLS total errors for one neighborhood, one per candidate dimension
/// `1..=pmax`. `None` when fewer than two candidates are feasible.
pub fn tls_sigma_table(chart: &LocalChart, cfg: &EstimatorConfig) -> Option<Vec<f64>> {
    let p = chart.ambient_dim();
    let q = nonconstant_index(chart, cfg.rel_tol);
    let p_max = pmax(p, q, cfg.k);
    if p_max < 2 {
        // TLS cannot distinguish d = 1: there is no j = 0 error to drop from.
        return None;
    }
    let mut sigmas = Vec::with_capacity(p_max);
    for j in 1..=p_max {
        match tls_quadratic(chart, j) {
            Ok(fit) => sigmas.push(fit.sigma),
            Err(_) => return None,
        }
    }
    Some(sigmas)
}

/// TLS local estimate: argmax over `j = 2..=pmax` of the relative drop
/// `eta_j`, ties broken toward the smallest `j`.
pub fn tls_local(chart: &LocalChart, cfg: &EstimatorConfig) -> LocalEstimate {
    let Some(sigmas) = tls_sigma_table(chart, cfg) else {
        return LocalEstimate::skipped(chart.center_index);
    };
    let drops = relative_drops(&sigmas);
    let mut best = 0;
    for (i, eta) in drops.iter().enumerate() {
        if *eta > drops[best] {
            best = i;
        }
    }
    LocalEstimate {
        center_index: chart.center_index,
        d_k: best + 2,
        weight: 1.0,
        valid: true,
    }
}

fn locals_over_cloud<F>(
    cloud: &PointCloud,
    cfg: &EstimatorConfig,
    f: F,
) -> Result<Vec<LocalEstimate>>
where
    F: Fn(&LocalChart, &EstimatorConfig) -> LocalEstimate + Sync,
{
    cfg.validate()?;
    let n = cloud.len();
    if n < cfg.k + 1 {
        return Err(Error::InvalidParameter(format!(
            "cloud of {n} points cannot supply K={} neighbors",
            cfg.k
        )));
    }
    let locals: Vec<LocalEstimate> = (0..n)
        .into_par_iter()
        .map(|i| match local_chart(cloud, i, cfg.k) {
            Ok(chart) => f(&chart, cfg),
            Err(_) => LocalEstimate::skipped(i),
        })
        .collect();
    Ok(locals)
}

/// All per-point QE local estimates, in point order.
pub fn qe_locals(cloud: &PointCloud, cfg: &EstimatorConfig) -> Result<Vec<LocalEstimate>> {
    locals_over_cloud(cloud, cfg, qe_local)
}

/// All per-point TLS local estimates, in point order.
pub fn tls_locals(cloud: &PointCloud, cfg: &EstimatorConfig) -> Result<Vec<LocalEstimate>> {
    locals_over_cloud(cloud, cfg, tls_local)
}

/// Weighted aggregation used by QE: weights are adjusted R-squared scores;
/// when every weight is zero the plain average of the local estimates is
/// returned instead.
pub(crate) fn aggregate_weighted(locals: &[LocalEstimate]) -> Result<GlobalEstimate> {
    let valid: Vec<&LocalEstimate> = locals.iter().filter(|e| e.valid).collect();
    if valid.is_empty() {
        return Err(Error::EstimationFailed(
            "no neighborhood produced a usable local estimate".into(),
        ));
    }
    let weight_sum: f64 = valid.iter().map(|e| e.weight).sum();
    let n_weighted = valid.iter().filter(|e| e.weight > 0.0).count();
    let d_hat = if weight_sum > 0.0 {
        valid.iter().map(|e| e.weight * e.d_k as f64).sum::<f64>() / weight_sum
    } else {
        valid.iter().map(|e| e.d_k as f64).sum::<f64>() / valid.len() as f64
    };
    Ok(GlobalEstimate {
        d_hat,
        d_rounded: d_hat.round() as usize,
        n_local: valid.len(),
        n_weighted,
    })
}

fn aggregate_unweighted(locals: &[LocalEstimate]) -> Result<GlobalEstimate> {
    let valid: Vec<&LocalEstimate> = locals.iter().filter(|e| e.valid).collect();
    if valid.is_empty() {
        return Err(Error::EstimationFailed(
            "no neighborhood produced a usable local estimate".into(),
        ));
    }
    let d_hat = valid.iter().map(|e| e.d_k as f64).sum::<f64>() / valid.len() as f64;
    Ok(GlobalEstimate {
        d_hat,
        d_rounded: d_hat.round() as usize,
        n_local: valid.len(),
        n_weighted: valid.len(),
    })
}

/// The QE estimator over a whole cloud.
pub fn qe_estimate(cloud: &PointCloud, cfg: &EstimatorConfig) -> Result<GlobalEstimate> {
    aggregate_weighted(&qe_locals(cloud, cfg)?)
}

/// The TLS estimator over a whole cloud (unweighted mean of local argmax
/// drops).
pub fn tls_estimate(cloud: &PointCloud, cfg: &EstimatorConfig) -> Result<GlobalEstimate> {
    aggregate_unweighted(&tls_locals(cloud, cfg)?)
}

/// Local PCA baseline: per neighborhood, the count of eigenvalues at least
/// `pca_alpha` times the leading one; globally the mean of those counts.
pub fn local_pca_estimate(cloud: &PointCloud, cfg: &EstimatorConfig) -> Result<GlobalEstimate> {
    let locals = locals_over_cloud(cloud, cfg, |chart, cfg| LocalEstimate {
        center_index: chart.center_index,
        d_k: eigenvalue_count(&chart.eigenvalues, cfg.pca_alpha),
        weight: 1.0,
        valid: true,
    })?;
    aggregate_unweighted(&locals)
}

/// Count rule behind the Local PCA baseline.
pub(crate) fn eigenvalue_count(eigenvalues: &[f64], ratio: f64) -> usize {
    let lead = eigenvalues.first().copied().unwrap_or(0.0);
    if lead <= 0.0 {
        return 1;
    }
    eigenvalues
        .iter()
        .filter(|&&l| l >= ratio * lead)
        .count()
        .max(1)
}

/// TwoNN baseline: maximum-likelihood estimate from the ratio of each
/// point's second to first nearest-neighbor distance, trimming the largest
/// ratios.
pub fn twonn_estimate(cloud: &PointCloud, cfg: &EstimatorConfig) -> Result<GlobalEstimate> {
    cfg.validate()?;
    let n = cloud.len();
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "TwoNN needs at least 3 points, got {n}"
        )));
    }
    let ratios: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let nb = knn(cloud, i, 2).ok()?;
            let r1 = cloud.dist2(i, nb[0]).sqrt();
            let r2 = cloud.dist2(i, nb[1]).sqrt();
            if r1 == 0.0 {
                None // duplicated point: the ratio is undefined
            } else {
                Some(r2 / r1)
            }
        })
        .collect();
    let usable: Vec<f64> = ratios.into_iter().flatten().collect();
    if usable.is_empty() {
        return Err(Error::EstimationFailed(
            "all nearest-neighbor ratios are undefined".into(),
        ));
    }
    let (d_hat, retained) = twonn_from_ratios(&usable, cfg.twonn_trim)?;
    let d_hat = d_hat.clamp(1.0, cloud.dim() as f64);
    Ok(GlobalEstimate {
        d_hat,
        d_rounded: d_hat.round() as usize,
        n_local: retained,
        n_weighted: retained,
    })
}

/// Maximum-likelihood aggregation on raw distance ratios. The `trim`
/// fraction with the largest ratios is set aside; because `log mu` is
/// exponential under the model, the discarded tail enters the likelihood as
/// censored mass at the cutoff, giving `d = m / (sum_kept log mu + (n - m)
/// log mu_cutoff)`. A plain mean over the kept ratios would be biased upward
/// by roughly a third at 10% trimming.
pub fn twonn_from_ratios(ratios: &[f64], trim: f64) -> Result<(f64, usize)> {
    let mut mus: Vec<f64> = ratios.to_vec();
    mus.sort_by(|a, b| a.total_cmp(b));
    let discard = (trim * mus.len() as f64).floor() as usize;
    let kept = mus.len() - discard;
    if kept == 0 {
        return Err(Error::EstimationFailed("trim removed every ratio".into()));
    }
    let mut log_sum: f64 = mus[..kept].iter().map(|m| m.ln()).sum();
    if discard > 0 {
        log_sum += discard as f64 * mus[kept - 1].ln();
    }
    if log_sum <= 0.0 {
        return Err(Error::EstimationFailed(
            "degenerate neighbor distance ratios".into(),
        ));
    }
    Ok((kept as f64 / log_sum, kept))
}

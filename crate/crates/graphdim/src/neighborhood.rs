//! k-nearest-neighbor extraction and local PCA re-coordinatization.
//!
//! Each neighborhood (a center plus its K nearest neighbors, K+1 points in
//! total) is centered at its local mean and rotated into the eigenbasis of
//! its sample covariance. Downstream regression happens entirely in these
//! PCA coordinates.

use crate::error::{Error, Result};
use crate::numerics::{sym_eigen_desc, Matrix};

/// An `n x p` point cloud; the universal input to every estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

impl PointCloud {
    /// Builds a cloud from row-major coordinates, enforcing `n >= 2`,
    /// `p >= 2` and finiteness.
    pub fn new(n: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if n < 2 || dim < 2 {
            return Err(Error::InvalidInput(format!(
                "point cloud needs n >= 2 and p >= 2, got n={n}, p={dim}"
            )));
        }
        if data.len() != n * dim {
            return Err(Error::InvalidInput(format!(
                "coordinate buffer length {} does not match {n}x{dim}",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(
                "point coordinates must all be finite".into(),
            ));
        }
        Ok(PointCloud { n, dim, data })
    }

    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidInput("points have unequal lengths".into()));
        }
        PointCloud::new(n, dim, points.concat())
    }

    /// Number of samples.
    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Ambient dimension.
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        let start = i * self.dim;
        &self.data[start..start + self.dim]
    }

    pub(crate) fn data(&self) -> &[f64] {
        &self.data
    }

    /// Squared Euclidean distance between stored points.
    #[inline]
    pub fn dist2(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// One neighborhood re-expressed in PCA coordinates.
#[derive(Debug, Clone)]
pub struct LocalChart {
    /// Index of the center point in the cloud.
    pub center_index: usize,
    /// The K neighbor indices, ascending by distance from the center.
    pub neighbor_indices: Vec<usize>,
    /// Local mean of the K+1 points (the new origin).
    pub mean: Vec<f64>,
    /// Orthonormal p x p eigenbasis, one eigenvector per column.
    pub basis: Matrix,
    /// Covariance eigenvalues, non-increasing.
    pub eigenvalues: Vec<f64>,
    /// `(K+1) x p` transformed points; row 0 is the center, row `l` is the
    /// l-th neighbor: `coords[l] = V^T (x_l - mean)`.
    pub coords: Matrix,
}

impl LocalChart {
    /// Number of points in the chart (K + 1).
    pub fn n_points(&self) -> usize {
        self.coords.rows()
    }

    pub fn ambient_dim(&self) -> usize {
        self.coords.cols()
    }

    /// Sample standard deviation of one PCA coordinate (divisor K).
    pub fn coord_std(&self, col: usize) -> f64 {
        let n = self.coords.rows();
        // Columns are centered by construction; the mean is skipped.
        let ss: f64 = (0..n).map(|r| self.coords.get(r, col).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    }
}

/// Indices of the K nearest neighbors of `cloud[k_index]`, ascending by
/// distance, ties broken by ascending point index.
pub fn knn(cloud: &PointCloud, k_index: usize, k: usize) -> Result<Vec<usize>> {
    let n = cloud.len();
    if k_index >= n {
        return Err(Error::InvalidParameter(format!(
            "center index {k_index} out of range for {n} points"
        )));
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "neighborhood size must satisfy 1 <= K <= n-1, got K={k}, n={n}"
        )));
    }
    let mut dists: Vec<(f64, usize)> = (0..n)
        .filter(|&i| i != k_index)
        .map(|i| (cloud.dist2(k_index, i), i))
        .collect();
    // Partial selection, then sort just the K winners.
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < dists.len() {
        dists.select_nth_unstable_by(k - 1, cmp);
        dists.truncate(k);
    }
    dists.sort_unstable_by(cmp);
    Ok(dists.into_iter().map(|(_, i)| i).collect())
}

/// Builds the local PCA chart of `cloud[k_index]` with its K nearest
/// neighbors: covariance of the K+1 points (divisor K), eigendecomposition,
/// and all points expressed in the eigenbasis centered at the local mean.
pub fn local_chart(cloud: &PointCloud, k_index: usize, k: usize) -> Result<LocalChart> {
    let neighbors = knn(cloud, k_index, k)?;
    let p = cloud.dim();
    let n_pts = k + 1;

    let member = |l: usize| -> &[f64] {
        if l == 0 {
            cloud.point(k_index)
        } else {
            cloud.point(neighbors[l - 1])
        }
    };

    let mut mean = vec![0.0; p];
    for l in 0..n_pts {
        for (m, x) in mean.iter_mut().zip(member(l)) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n_pts as f64;
    }

    let mut cov = Matrix::zeros(p, p);
    let mut dev = vec![0.0; p];
    for l in 0..n_pts {
        for (d, (x, m)) in dev.iter_mut().zip(member(l).iter().zip(&mean)) {
            *d = x - m;
        }
        for i in 0..p {
            if dev[i] == 0.0 {
                continue;
            }
            for j in i..p {
                let v = cov.get(i, j) + dev[i] * dev[j];
                cov.set(i, j, v);
            }
        }
    }
    let divisor = k as f64;
    for i in 0..p {
        for j in i..p {
            let v = cov.get(i, j) / divisor;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }

    if cov.max_abs() == 0.0 {
        return Err(Error::DegenerateNeighborhood { index: k_index });
    }

    let eig = sym_eigen_desc(&cov)?;
    // Covariances are PSD; tiny negative eigenvalues are rounding noise.
    let eigenvalues: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| if l < 0.0 && l > -1e-12 { 0.0 } else { l })
        .collect();

    let mut coords = Matrix::zeros(n_pts, p);
    for l in 0..n_pts {
        for (d, (x, m)) in dev.iter_mut().zip(member(l).iter().zip(&mean)) {
            *d = x - m;
        }
        for c in 0..p {
            let mut s = 0.0;
            for r in 0..p {
                s += eig.eigenvectors.get(r, c) * dev[r];
            }
            coords.set(l, c, s);
        }
    }

    Ok(LocalChart {
        center_index: k_index,
        neighbor_indices: neighbors,
        mean,
        basis: eig.eigenvectors,
        eigenvalues,
        coords,
    })
}

/// Largest 1-based coordinate index `q` whose standard deviation exceeds
/// `rel_tol` times that of the first coordinate; 0 if even the first
/// coordinate is degenerate.
pub fn nonconstant_index(chart: &LocalChart, rel_tol: f64) -> usize {
    let p = chart.ambient_dim();
    let std1 = chart.coord_std(0);
    if std1 <= 0.0 {
        return 0;
    }
    let threshold = rel_tol * std1;
    for col in (0..p).rev() {
        if chart.coord_std(col) > threshold {
            return col + 1;
        }
    }
    0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::SplitMix64;

    fn random_cloud(n: usize, p: usize, seed: u64) -> PointCloud {
        let mut rng = SplitMix64::new(seed);
        PointCloud::new(
            n,
            p,
            (0..n * p).map(|_| rng.next_f64() * 4.0 - 2.0).collect(),
        )
        .unwrap()
    }

    #[test]
    fn knn_orders_by_distance() {
        let cloud = PointCloud::from_points(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![3.0, 0.0],
            vec![10.0, 0.0],
        ])
        .unwrap();
        assert_eq!(knn(&cloud, 0, 2).unwrap(), vec![1, 2]);
        // K = n-1 returns everyone else.
        assert_eq!(knn(&cloud, 0, 3).unwrap(), vec![1, 2, 3]);
        assert!(knn(&cloud, 0, 4).is_err());
    }

    #[test]
    fn knn_matches_full_sort_oracle() {
        let cloud = random_cloud(100, 5, 42);
        for center in [0usize, 17, 99] {
            let got = knn(&cloud, center, 10).unwrap();
            let mut all: Vec<(f64, usize)> = (0..100)
                .filter(|&i| i != center)
                .map(|i| (cloud.dist2(center, i), i))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let oracle: Vec<usize> = all[..10].iter().map(|&(_, i)| i).collect();
            assert_eq!(got, oracle);
        }
    }

    #[test]
    fn knn_ties_break_by_index() {
        // Three points equidistant from the center.
        let cloud = PointCloud::from_points(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, 0.0],
        ])
        .unwrap();
        assert_eq!(knn(&cloud, 0, 2).unwrap(), vec![1, 2]);
    }

    #[test]
    fn knn_is_permutation_consistent() {
        let cloud = random_cloud(40, 3, 7);
        let got = knn(&cloud, 5, 8).unwrap();
        // Reverse the storage order and map indices.
        let n = cloud.len();
        let reversed: Vec<Vec<f64>> = (0..n).rev().map(|i| cloud.point(i).to_vec()).collect();
        let rcloud = PointCloud::from_points(reversed).unwrap();
        let rgot = knn(&rcloud, n - 1 - 5, 8).unwrap();
        let mapped: std::collections::BTreeSet<usize> =
            rgot.into_iter().map(|i| n - 1 - i).collect();
        let expect: std::collections::BTreeSet<usize> = got.into_iter().collect();
        assert_eq!(mapped, expect);
    }

    #[test]
    fn collinear_points_have_rank_one_chart() {
        let s = 1.0 / 2.0_f64.sqrt();
        let cloud =
            PointCloud::from_points(vec![vec![0.0, 0.0], vec![s, s], vec![2.0 * s, 2.0 * s]])
                .unwrap();
        let chart = local_chart(&cloud, 0, 2).unwrap();
        assert!(chart.eigenvalues[1].abs() < 1e-12);
        // First axis parallel to (1,1)/sqrt(2) up to sign.
        let axis = [chart.basis.get(0, 0), chart.basis.get(1, 0)];
        let dot = (axis[0] * s + axis[1] * s).abs();
        assert!((dot - 1.0).abs() < 1e-10);
    }

    #[test]
    fn chart_reconstructs_original_points() {
        let cloud = random_cloud(30, 4, 11);
        let chart = local_chart(&cloud, 3, 12).unwrap();
        for (l, &idx) in std::iter::once(&chart.center_index)
            .chain(chart.neighbor_indices.iter())
            .enumerate()
        {
            let original = cloud.point(idx);
            for r in 0..4 {
                let mut rec = chart.mean[r];
                for c in 0..4 {
                    rec += chart.basis.get(r, c) * chart.coords.get(l, c);
                }
                assert!((rec - original[r]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn chart_columns_are_centered_and_trace_is_preserved() {
        let cloud = random_cloud(50, 6, 3);
        let chart = local_chart(&cloud, 10, 20).unwrap();
        let n_pts = chart.n_points();
        for c in 0..6 {
            let mean: f64 = (0..n_pts).map(|r| chart.coords.get(r, c)).sum::<f64>() / n_pts as f64;
            assert!(mean.abs() < 1e-10);
        }
        // Trace preservation: sum of eigenvalues equals total variance.
        let total_eig: f64 = chart.eigenvalues.iter().sum();
        let mut total_var = 0.0;
        for c in 0..6 {
            let col_ss: f64 = (0..n_pts).map(|r| chart.coords.get(r, c).powi(2)).sum();
            total_var += col_ss / (n_pts - 1) as f64;
        }
        assert!((total_eig - total_var).abs() < 1e-10 * total_eig.max(1.0));
    }

    #[test]
    fn identical_points_are_degenerate() {
        let cloud = PointCloud::from_points(vec![vec![1.0, 2.0]; 5]).unwrap();
        match local_chart(&cloud, 0, 3) {
            Err(Error::DegenerateNeighborhood { index: 0 }) => {}
            other => panic!("expected degenerate neighborhood, got {other:?}"),
        }
    }

    #[test]
    fn axis_aligned_chart_recovers_inputs_up_to_signed_permutation() {
        // Centered points with diagonal covariance and distinct spreads.
        let pts = vec![
            vec![2.0, 0.0],
            vec![-2.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ];
        let cloud = PointCloud::from_points(pts.clone()).unwrap();
        let chart = local_chart(&cloud, 0, 3).unwrap();
        // Basis should be a signed permutation of identity, so the coords
        // equal the inputs up to axis sign/order.
        for c in 0..2 {
            let col = [chart.basis.get(0, c).abs(), chart.basis.get(1, c).abs()];
            let max = col[0].max(col[1]);
            let min = col[0].min(col[1]);
            assert!(max > 1.0 - 1e-8 && min < 1e-8);
        }
        let row_order: Vec<usize> = std::iter::once(chart.center_index)
            .chain(chart.neighbor_indices.iter().copied())
            .collect();
        for (l, &pt_idx) in row_order.iter().enumerate() {
            let recovered: Vec<f64> = (0..2)
                .map(|r| {
                    (0..2)
                        .map(|c| chart.basis.get(r, c) * chart.coords.get(l, c))
                        .sum::<f64>()
                })
                .collect();
            for (a, b) in recovered.iter().zip(&pts[pt_idx]) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn nonconstant_index_thresholds() {
        // Synthetic chart with controlled column spreads.
        let make = |stds: &[f64]| {
            let p = stds.len();
            let rows = 4;
            let pattern = [1.0, -1.0, 0.5, -0.5];
            let mut coords = Matrix::zeros(rows, p);
            for (c, s) in stds.iter().enumerate() {
                for r in 0..rows {
                    coords.set(r, c, pattern[r] * s);
                }
            }
            LocalChart {
                center_index: 0,
                neighbor_indices: (1..rows).collect(),
                mean: vec![0.0; p],
                basis: Matrix::identity(p),
                eigenvalues: stds.iter().map(|s| s * s).collect(),
                coords,
            }
        };
        assert_eq!(nonconstant_index(&make(&[1.0, 0.5, 0.0]), 1e-8), 2);
        assert_eq!(nonconstant_index(&make(&[1.0, 1.0, 1.0]), 1e-8), 3);
        assert_eq!(nonconstant_index(&make(&[1.0, 1e-3, 1e-12]), 1e-8), 2);
        assert_eq!(nonconstant_index(&make(&[0.0, 0.0]), 1e-8), 0);
    }

    #[test]
    fn isometry_leaves_neighbors_and_coords_stable() {
        use crate::manifolds::random_orthogonal;
        let cloud = random_cloud(60, 3, 21);
        let q = random_orthogonal(3, 909);
        let t = [4.0, -7.0, 0.5];
        let moved: Vec<Vec<f64>> = (0..cloud.len())
            .map(|i| {
                let x = cloud.point(i);
                (0..3)
                    .map(|r| (0..3).map(|c| q.get(r, c) * x[c]).sum::<f64>() + t[r])
                    .collect()
            })
            .collect();
        let moved = PointCloud::from_points(moved).unwrap();

        let a = local_chart(&cloud, 7, 15).unwrap();
        let b = local_chart(&moved, 7, 15).unwrap();
        assert_eq!(a.neighbor_indices, b.neighbor_indices);
        // Random charts have well-separated eigenvalues; coords match up to
        // per-axis sign.
        for c in 0..3 {
            let sign = if (a.coords.get(0, c) - b.coords.get(0, c)).abs() < 1e-8 {
                1.0
            } else {
                -1.0
            };
            for r in 0..a.n_points() {
                assert!((a.coords.get(r, c) - sign * b.coords.get(r, c)).abs() < 1e-8);
            }
        }
    }
}

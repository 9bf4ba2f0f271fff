//! Randomized property checks over the numeric kernels and the
//! neighborhood machinery.

use proptest::prelude::*;

use graphdim::numerics::{
    f_survival, regularized_incomplete_beta, smallest_singular_value, sym_eigen_desc, Matrix,
};
use graphdim::regression::{
    feature_index, feature_term, predictor_count, quadratic_features, relative_drops,
};
use graphdim::{knn, PointCloud};

proptest! {
    #[test]
    fn beta_symmetry(x in 1e-6..1.0f64, a in 0.3..30.0f64, b in 0.3..30.0f64) {
        let lhs = regularized_incomplete_beta(a, b, x).unwrap();
        let rhs = regularized_incomplete_beta(b, a, 1.0 - x).unwrap();
        prop_assert!((lhs + rhs - 1.0).abs() < 1e-10);
    }

    #[test]
    fn f_survival_monotone_and_bounded(
        d1 in 1usize..25,
        d2 in 1usize..60,
        f_lo in 0.0..20.0f64,
        bump in 0.0..20.0f64,
    ) {
        let p_lo = f_survival(f_lo, d1, d2).unwrap();
        let p_hi = f_survival(f_lo + bump, d1, d2).unwrap();
        prop_assert!((0.0..=1.0).contains(&p_lo));
        prop_assert!(p_hi <= p_lo + 1e-12);
    }

    #[test]
    fn feature_ordering_roundtrips(j in 1usize..12) {
        for idx in 0..predictor_count(j) {
            prop_assert_eq!(feature_index(j, feature_term(j, idx)), idx);
        }
    }

    #[test]
    fn feature_values_match_their_terms(x in prop::collection::vec(-3.0..3.0f64, 1..7)) {
        let j = x.len();
        let feats = quadratic_features(&x);
        prop_assert_eq!(feats.len(), predictor_count(j));
        for (idx, value) in feats.iter().enumerate() {
            let expect = match feature_term(j, idx) {
                graphdim::regression::FeatureTerm::Linear(a) => x[a],
                graphdim::regression::FeatureTerm::Square(a) => x[a] * x[a],
                graphdim::regression::FeatureTerm::Cross(a, b) => x[a] * x[b],
            };
            prop_assert!((value - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn drops_never_exceed_one_for_nonnegative_errors(
        sigmas in prop::collection::vec(0.0..100.0f64, 2..10)
    ) {
        for eta in relative_drops(&sigmas) {
            prop_assert!(eta <= 1.0 + 1e-12);
            prop_assert!(eta.is_finite());
        }
    }

    #[test]
    fn eigen_invariants_on_random_symmetric(
        seed_vals in prop::collection::vec(-1.0..1.0f64, 36)
    ) {
        let p = 8;
        let mut s = Matrix::zeros(p, p);
        let mut it = seed_vals.into_iter().cycle();
        for i in 0..p {
            for j in i..p {
                let v = it.next().unwrap();
                s.set(i, j, v);
                s.set(j, i, v);
            }
        }
        let e = sym_eigen_desc(&s).unwrap();
        for w in e.eigenvalues.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        let vtv = e.eigenvectors.transpose().matmul(&e.eigenvectors);
        for i in 0..p {
            for j in 0..p {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((vtv.get(i, j) - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn singular_value_interlaces_under_column_removal(
        data in prop::collection::vec(-2.0..2.0f64, 48)
    ) {
        let a = Matrix::new(12, 4, data).unwrap();
        let full = smallest_singular_value(&a).unwrap();
        for drop in 0..4usize {
            let rows: Vec<Vec<f64>> = (0..12)
                .map(|r| (0..4).filter(|&c| c != drop).map(|c| a.get(r, c)).collect())
                .collect();
            let sub = Matrix::from_rows(&rows).unwrap();
            let reduced = smallest_singular_value(&sub).unwrap();
            prop_assert!(full <= reduced + 1e-9);
        }
    }

    #[test]
    fn knn_consistent_under_permutation(
        data in prop::collection::vec(-5.0..5.0f64, 60),
        rot in 1usize..19,
    ) {
        let n = 20;
        let pts: Vec<Vec<f64>> = data.chunks(3).map(|c| c.to_vec()).collect();
        let cloud = PointCloud::from_points(pts.clone()).unwrap();
        let got = knn(&cloud, 0, 6).unwrap();

        // Rotate the storage order and map the indices back.
        let mut rotated = pts;
        rotated.rotate_left(rot);
        let rcloud = PointCloud::from_points(rotated).unwrap();
        let center = (n - rot) % n;
        let rgot = knn(&rcloud, center, 6).unwrap();
        let mapped: std::collections::BTreeSet<usize> =
            rgot.into_iter().map(|i| (i + rot) % n).collect();
        let expect: std::collections::BTreeSet<usize> = got.into_iter().collect();
        prop_assert_eq!(mapped, expect);
    }
}

//! Intrinsic dimension estimation for point clouds via local graph
//! structure.
//!
//! A point cloud sampled from a d-dimensional manifold looks, around each
//! point, like the graph of a smooth map from d tangent coordinates to the
//! remaining normal coordinates. This crate re-expresses every neighborhood
//! in local PCA coordinates and then asks, for each candidate dimension `j`,
//! how well a quadratic model explains coordinate `j+1` from the first `j`:
//!
//! * **QE** fits the quadratic by ordinary least squares and selects the
//!   smallest `j` whose fit — and every later one — is significant under the
//!   overall F test, averaging local estimates weighted by adjusted
//!   R-squared.
//! * **TLS** measures the total orthogonal error of the augmented
//!   feature-response matrix (the squared smallest singular value after
//!   centering) and selects the largest relative error drop.
//!
//! **Local PCA** (eigenvalue-ratio counting) and **TwoNN** (two-neighbor
//! maximum likelihood) are included as baselines, along with samplers for
//! the usual benchmark manifolds (spheres, balls, Gaussian density
//! surfaces, deformed spheres, cylinder, helix, Swiss roll, Moebius strip,
//! torus, hyperbolic surface) and a replicated benchmark harness with
//! neighborhood-size sweeps and stability-region aggregation.
//!
//! Determinism: all sampling is keyed by 64-bit seeds through a pinned
//! derivation (see [`seeding`]) and a ChaCha8 stream with in-crate
//! uniform/normal conversions, so identical seeds give bit-identical data on
//! every platform. Estimators evaluate neighborhoods in parallel but reduce
//! in index order, so results do not depend on the worker count.

// Indexed loops mirror the written form of the matrix recurrences; iterator
// rewrites obscure them.
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod estimators;
pub mod harness;
pub mod manifolds;
pub mod neighborhood;
pub mod numerics;
pub mod regression;
pub mod seeding;

pub use error::{Error, Result};
pub use estimators::{
    local_pca_estimate, pmax, qe_estimate, tls_estimate, twonn_estimate, EstimatorConfig,
    GlobalEstimate, LocalEstimate,
};
pub use harness::{
    estimate_with, load_cloud, run_bench, run_bench_with_workers, save_cloud, stability_search,
    write_results, BenchConfig, ManifoldEntry, Method, RunResult,
};
pub use manifolds::{add_noise, sample, ManifoldKind, ManifoldParams, ManifoldSpec, SampleConfig};
pub use neighborhood::{knn, local_chart, nonconstant_index, LocalChart, PointCloud};

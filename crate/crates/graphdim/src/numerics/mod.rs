//! Dense linear-algebra and special-function kernels shared by the
//! estimators: symmetric eigendecomposition, smallest singular value, stable
//! least squares, and the F-distribution survival function.
//!
//! Everything here is a pure function of its inputs and safe to call from any
//! number of worker threads.

mod eigen;
mod lstsq;
mod matrix;
mod special;
mod svd;

pub use eigen::{sym_eigen_desc, EigenDecomposition};
pub use lstsq::{least_squares_solve, LeastSquaresSolution};
pub use matrix::Matrix;
pub use special::{f_survival, ln_gamma, regularized_incomplete_beta};
pub use svd::smallest_singular_value;

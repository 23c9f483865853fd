//! Sparse symmetric storage, Cholesky factorization and GMRF sampling.

mod cholesky;
mod ordering;
mod sparse;

pub use cholesky::{cholesky, log_det, sample_gmrf, solve, CholFactor, SymbolicCholesky};
pub use ordering::minimum_degree;
pub use sparse::SparseSymMatrix;

//! Sparse storage, dense kernels and the factorizations the solvers share.

pub mod cg;
pub mod dense;
pub mod lu;
pub mod qp;
pub mod sparse;
pub mod spd;

pub use cg::{cg_least_squares, CgResult, CgStatus, TriangularPrecond};
pub use dense::DenseMatrix;
pub use lu::{lu_rank_revealing, solve_upper, PermutedLu, DEFAULT_PIVOT_TOL};
pub use sparse::SparseMatrix;
pub use spd::{factor_spd, solve_spd, SpdFactor};

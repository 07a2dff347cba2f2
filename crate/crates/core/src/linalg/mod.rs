//! Dense small-matrix kernels.

mod dense;
mod krylov;
mod qr;

pub use dense::{axpy, cholesky_solve, dot, norm, scaled_sub, spectral_bounds, sub, DenseMatrix};
pub use krylov::{cg_solve, gmres_solve, KrylovSolution};
pub use qr::{aa_coefficients, aa_coefficients_with, least_squares, AaCoefficients, LeastSquares, DEFAULT_RCOND};

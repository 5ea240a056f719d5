//! Dense real linear algebra: matrices, SVD, small eigenproblems,
//! pseudoinverse, least squares and the discrete Riccati equation.

mod dare;
mod eig;
pub mod gemm;
mod matrix;
mod pinv;
mod svd;

pub use dare::{dare_residual, lqr_gain, riccati_map, solve_dare, DARE_MAX_ITERS, DARE_TOL};
pub use eig::{eig, normalize_phase, EigResult, MAX_EIG_DIM};
pub use matrix::{thin_qr, DenseMatrix, Lu};
pub use pinv::{default_pinv_tol, lstsq, pinv, pinv_default};
pub use svd::{svd, svd_full, truncated_svd, FullSvd, SvdResult};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("expected {expected} entries, got {got}")]
    InvalidData { expected: usize, got: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is singular")]
    Singular,
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },
}

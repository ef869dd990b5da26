//! Dense symmetric linear algebra and Student-t distribution helpers.

mod dist;
mod linalg;
mod matrix;

pub use dist::{student_t_pvalue, student_t_quantile};
pub use linalg::{
    chol_solve, pinv_sym, sym_eigen, Cholesky, EigenDecomp, DEFAULT_PINV_TOL, DEFAULT_PIVOT_TOL,
};
pub use matrix::{dot, Matrix, SymMatrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("eigen-decomposition did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
}

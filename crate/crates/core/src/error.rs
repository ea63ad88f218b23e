use thiserror::Error;

use crate::algebra::AlgebraElement;

/// Errors shared by every module of the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An element does not conform to the block structure of the algebra.
    #[error("block structure mismatch: expected dims {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    /// Invalid construction data (weights, nest partitions, ...).
    #[error("invalid structure: {0}")]
    Structure(String),

    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A matrix that must be positive semidefinite has a negative eigenvalue.
    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:.6e}")]
    NotPositive { eigenvalue: f64 },

    /// A stated precondition of the operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A subspace expected to be contained in another is not.
    #[error("containment failure: basis vector {index} has residual {residual:.3e}")]
    NotContained { index: usize, residual: f64 },

    /// The expectation fails to be multiplicative on the generated algebra;
    /// the witness pair is the offending product.
    #[error("expectation is not multiplicative on the generated algebra (residual {residual:.3e})")]
    NotTracial {
        residual: f64,
        witness: Box<(AlgebraElement, AlgebraElement)>,
    },

    /// A Gram product of wandering vectors falls outside the diagonal.
    #[error("gram product of wandering basis vectors {i} and {j} lies outside the diagonal (residual {residual:.3e})")]
    GramOutsideDiagonal { i: usize, j: usize, residual: f64 },

    /// Pairwise star-orthogonality required by a column sum fails.
    #[error("column family is not star-orthogonal: x_{i}* x_{j} has norm {residual:.3e}")]
    NotOrthogonal { i: usize, j: usize, residual: f64 },

    /// A verified structural identity failed beyond tolerance after
    /// construction; carries the residual for diagnosis.
    #[error("internal invariant failed: {what} (residual {residual:.3e})")]
    Diagnostic { what: String, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

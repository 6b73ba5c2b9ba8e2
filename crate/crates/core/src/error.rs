use thiserror::Error;

use crate::solver::SolveStats;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("graph is not chordal")]
    NotChordal,

    #[error("tree decomposition is not rooted")]
    NotRooted,

    #[error("tree decomposition is not binary: node {node} has {children} children")]
    NotBinary { node: usize, children: usize },

    #[error("tree decomposition is invalid: {0}")]
    InvalidDecomposition(String),

    #[error("node {node} has degree {degree}; splitting needs degree >= 4")]
    DegreeTooSmall { node: usize, degree: usize },

    #[error("graph with {n} vertices exceeds the limit of {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("matrix is not positive semidefinite: min eigenvalue {min_eigenvalue:e}")]
    NotPsd { min_eigenvalue: f64 },

    #[error("point is infeasible: residual {residual:e} exceeds {tol:e}")]
    Infeasible { residual: f64, tol: f64 },

    #[error("overlapping blocks disagree by {max_discrepancy:e} (tolerance {tol:e})")]
    AssemblyConflict { max_discrepancy: f64, tol: f64 },

    #[error("solver diverged after {} iterations", .stats.iterations)]
    Diverged { stats: Box<SolveStats> },

    #[error("solver did not converge in {} iterations (primal {:e}, dual {:e})", .stats.iterations, .stats.primal_residual, .stats.dual_residual)]
    NotConverged { stats: Box<SolveStats> },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPsd { .. }
                | Error::Infeasible { .. }
                | Error::AssemblyConflict { .. }
                | Error::Diverged { .. }
                | Error::NotConverged { .. }
                | Error::Numerical(_)
        )
    }
}

use thiserror::Error;

/// Errors raised by the ridge-approximation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RidgeError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {what} at row {row}, column {col}")]
    NonFinite {
        what: &'static str,
        row: usize,
        col: usize,
    },

    #[error("matrix columns are not orthonormal (max deviation {0:.3e})")]
    NotOrthonormal(f64),

    #[error(
        "infeasible configuration: a degree-1 polynomial on an n-dimensional subspace is a \
         ridge function on a single direction, so p = 1 requires n = 1 (got n = {n})"
    )]
    DegreeOneNeedsDimOne { n: usize },

    #[error("singular value decomposition did not converge")]
    SvdNoConvergence,

    #[error("design matrix has numerical rank 0; no polynomial direction exists")]
    RankZero,

    #[error(
        "condition number undefined for an underdetermined design ({rows} rows < {cols} columns)"
    )]
    Underdetermined { rows: usize, cols: usize },

    #[error("unknown experiment '{name}'; valid names: {valid}")]
    UnknownExperiment { name: String, valid: String },
}

pub type Result<T> = std::result::Result<T, RidgeError>;

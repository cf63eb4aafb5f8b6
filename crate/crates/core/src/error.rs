use thiserror::Error;

/// Errors raised by the forward-regression toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("column {0} has zero sample variance")]
    ZeroVarianceColumn(usize),

    #[error("selected columns are numerically collinear")]
    RankDeficientSupport,

    #[error("column {0} lies in the span of the current support")]
    CollinearCandidate(usize),

    #[error("design is not standardized (column {column}: mean {mean:e}, second moment {second_moment})")]
    NotStandardized {
        column: usize,
        mean: f64,
        second_moment: f64,
    },

    #[error("enumeration needs {required} subsets, cap is {cap}")]
    BudgetExceeded { required: u128, cap: u128 },

    #[error("sparse eigenvalue must be positive, got {0}")]
    NonpositiveEigenvalue(f64),

    #[error("dataset carries no ground truth (theta0, epsilon)")]
    MissingGroundTruth,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Failures surfaced by the command-line front end, each with its exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed input or configuration (exit 2).
    #[error("{0}")]
    Input(String),
    /// Degenerate data such as a constant covariate (exit 3).
    #[error("{0}")]
    Degenerate(String),
    /// A deterministic bound check failed (exit 4).
    #[error("{0}")]
    BoundFailure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::BoundFailure(_) => 4,
        }
    }
}

impl From<fwdreg_core::Error> for CliError {
    fn from(e: fwdreg_core::Error) -> Self {
        use fwdreg_core::Error as E;
        match e {
            E::ZeroVarianceColumn(_) | E::RankDeficientSupport | E::CollinearCandidate(_) => {
                CliError::Degenerate(e.to_string())
            }
            E::BudgetExceeded { .. } => CliError::Input(format!(
                "{e}; exact enumeration is out of reach, reduce p or the subset size, \
                 or use the sampled mode"
            )),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

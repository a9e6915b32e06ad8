use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("failed to parse config: {0}")]
    Parse(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CVaR level epsilon must lie in (0, 1), got {0}")]
    Epsilon(f64),

    #[error("ambiguity set must be centered (zero mean) for {0}")]
    NonzeroMean(&'static str),

    #[error("no bracket for the CVaR threshold after {0} expansions")]
    Bracket(usize),

    #[error("innovation covariance is not positive definite")]
    SingularInnovation,

    #[error("constraint construction produced a non-finite value: {0}")]
    NonFinite(&'static str),

    #[error("solver: {0}")]
    Solver(String),

    #[error("controller program infeasible: {0}")]
    Infeasible(String),

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("run {run}: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("operator is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("trace is not 1 (got {trace})")]
    InvalidTrace { trace: f64 },

    #[error("illegitimate density matrix (min eigenvalue {min_eigenvalue})")]
    Illegitimate { min_eigenvalue: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error(
        "quadrature did not converge (relative change {relative_change:e} on grid refinement)"
    )]
    Accuracy { relative_change: f64 },

    #[error("correlation undefined: all four coincidence probabilities vanish")]
    UndefinedCorrelation,

    #[error("projector set is singular (smallest singular value {smallest_singular_value:e})")]
    DegenerateTomography { smallest_singular_value: f64 },

    #[error("expected {expected} tomography records, got {got}")]
    RecordCount { expected: usize, got: usize },

    #[error("invalid probability {0} (density matrix is not positive)")]
    InvalidProbability(f64),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("malformed input: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

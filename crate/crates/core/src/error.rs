use thiserror::Error;

/// Errors raised across the crate.
///
/// The variants split into two families that the CLI maps to different exit
/// codes: malformed input (`InvalidInput`, `Parse`, `Io`, ...) and numerical
/// trouble discovered while evaluating a model.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("baseline rate {mu} must lie strictly inside ({pi_min}, {pi_max})")]
    InfeasibleBaseline { mu: f64, pi_min: f64, pi_max: f64 },

    #[error("spiking probability {value} left [0, 1] at bin {index}; parameters are infeasible")]
    ModelInvalid { index: usize, value: f64 },

    #[error("model is not stationary: sum of the history kernel is {kernel_sum} (must be < 1)")]
    Nonstationary { kernel_sum: f64 },

    #[error("non-finite value at bin {index}")]
    Numeric { index: usize },

    #[error("need at least {needed} events, found {found}")]
    InsufficientEvents { needed: usize, found: usize },

    #[error("perturbation leaves the feasible set")]
    InfeasiblePerturbation,

    #[error("no feasible probe direction found")]
    DegenerateGeometry,

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the numbers themselves rather than by the
    /// shape or syntax of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ModelInvalid { .. }
                | Error::Nonstationary { .. }
                | Error::Numeric { .. }
                | Error::Singular(_)
                | Error::DegenerateGeometry
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

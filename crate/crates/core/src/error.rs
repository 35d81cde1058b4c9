use thiserror::Error;

/// Errors raised by model construction, filtering, the least-squares oracle
/// and the simulation harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("reaction {reaction} changes more than one species")]
    NonDiagonalizable { reaction: usize },

    #[error("propensity of reaction {reaction} is not affine: {detail}")]
    NonAffine { reaction: usize, detail: String },

    #[error("innovation covariance is not positive definite at step {step}")]
    SingularInnovation { step: usize },

    #[error("integration step {step} exceeds the interval length {interval}")]
    StepTooLarge { step: f64, interval: f64 },

    #[error("non-finite state encountered {context}")]
    NonFiniteState { context: String },

    #[error("noise gain is singular for state {index} (g^2 = {value})")]
    SingularG { index: usize, value: f64 },

    #[error("Hessian is not positive definite (block {block})")]
    IndefiniteHessian { block: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("sequence has zero variance")]
    DegenerateSequence,

    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("model file line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Config(String),
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::SingularInnovation { .. }
            | Error::NonFiniteState { .. }
            | Error::SingularG { .. }
            | Error::IndefiniteHessian { .. }
            | Error::DegenerateSequence => true,
            Error::Replicate { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            Error::SingularInnovation { .. } => Error::SingularInnovation { step },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

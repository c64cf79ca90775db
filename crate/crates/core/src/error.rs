use thiserror::Error;

/// Errors raised by the bound, diagnostic and reconstruction pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter {theta:?} lies outside the open domain of {model}")]
    Domain { model: String, theta: Vec<f64> },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("model {model} does not support {capability}")]
    Capability { model: String, capability: String },

    #[error("observation has zero density at theta {theta:?}")]
    Support { theta: Vec<f64> },

    #[error("integrand returned a non-finite value ({value}) on a positive-mass point")]
    Integrand { value: f64 },

    #[error("integration coverage failure: {0}")]
    Coverage(String),

    #[error("likelihood ratio is infinite on a set of positive mass: {0}")]
    AbsoluteContinuity(String),

    #[error("{what} is singular (condition number {condition:e})")]
    Singular { what: String, condition: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("at theta {theta:?} during {operation}: {source}")]
    At {
        theta: Vec<f64>,
        operation: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Attach the parameter point and operation name to an error.
    pub fn at(self, theta: &[f64], operation: &str) -> Self {
        match self {
            e @ Error::At { .. } => e,
            e => Error::At {
                theta: theta.to_vec(),
                operation: operation.to_string(),
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with location context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::At { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for numerical failures (singular matrices, non-finite values,
    /// quadrature trouble), as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::Evaluation(_)
                | Error::Support { .. }
                | Error::Integrand { .. }
                | Error::Coverage(_)
                | Error::AbsoluteContinuity(_)
                | Error::Singular { .. }
                | Error::Quadrature(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

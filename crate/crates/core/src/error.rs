use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum MpaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numeric overflow: {0}")]
    NumericOverflow(String),
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    #[error("spectral gap violated: eigenvalue {eigenvalue:e} (index {index}) is within {tol:e} of zero")]
    SpectralGapViolation { index: usize, eigenvalue: f64, tol: f64 },
    #[error("domain violation: {0}")]
    DomainViolation(String),
    #[error("degenerate ray: component {component} has coordinate {coordinate:e} at the cone maximum")]
    DegenerateRay { component: usize, coordinate: f64 },
    #[error(
        "stepsize underflow at gradient norm {grad_norm:e}: no admissible step down to {s_min:e}; \
         a non-critical point always admits a positive decrease step, so this points at \
         inner-solver tolerance or scaling trouble"
    )]
    StepsizeUnderflow { grad_norm: f64, s_min: f64 },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MpaError>;

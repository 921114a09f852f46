use thiserror::Error;

/// Errors raised by the numerical kernels and the model layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("pole: {what} at non-positive integer argument {at}")]
    Pole { what: &'static str, at: f64 },

    #[error("no convergent regime for {what} at z = {z}")]
    Divergence { what: &'static str, z: f64 },

    #[error("{what} did not converge within {iterations} iterations")]
    NonConverged { what: &'static str, iterations: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("premium {premium} is not below income rate b = {b}")]
    PremiumExceedsIncome { premium: f64, b: f64 },

    #[error("net profit constraint violated: {0}")]
    ConstraintViolated(String),

    #[error("no adjustment coefficient: net profit margin {margin} is not positive")]
    NoAdjustmentCoefficient { margin: f64 },

    #[error("transcendental decay equation has no negative root")]
    NoNegativeRoot,

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("surplus {x} is beyond the built range [0, {limit}]")]
    OutOfBuiltRange { x: f64, limit: f64 },

    #[error("degenerate Wronskian {value:e} at {x}")]
    DegenerateWronskian { x: f64, value: f64 },

    #[error("complex residue {residue:e} exceeds tolerance for a real-valued {what}")]
    ComplexResidue { what: &'static str, residue: f64 },

    #[error("probability {0} lies outside [0, 1] beyond round-off")]
    ProbabilityOutOfRange(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("cache: {0}")]
    Cache(String),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Constraint,
    Numerical,
    Input,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::PremiumExceedsIncome { .. }
            | Error::ConstraintViolated(_)
            | Error::NoAdjustmentCoefficient { .. }
            | Error::NoNegativeRoot => ErrorKind::Constraint,
            Error::Divergence { .. }
            | Error::NonConverged { .. }
            | Error::Quadrature(_)
            | Error::DegenerateWronskian { .. }
            | Error::ComplexResidue { .. }
            | Error::ProbabilityOutOfRange(_)
            | Error::DegenerateFit(_) => ErrorKind::Numerical,
            Error::Pole { .. }
            | Error::Domain(_)
            | Error::InvalidParameter(_)
            | Error::OutOfBuiltRange { .. }
            | Error::InsufficientData(_)
            | Error::Cache(_) => ErrorKind::Input,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

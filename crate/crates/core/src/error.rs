use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "solver did not converge after {iterations} iterations (last iterate {last_iterate}, residual {residual:e})"
    )]
    Solver {
        iterations: usize,
        last_iterate: f64,
        residual: f64,
    },

    #[error("antenna design error: {0}")]
    Design(String),

    #[error("infeasible grating period: required {lower:e} m <= d' <= {upper:e} m, got d' = {grating_period:e} m")]
    GratingPeriod {
        lower: f64,
        upper: f64,
        grating_period: f64,
    },

    #[error("infeasible design: grating-period interval is empty ({lower:e} m > {upper:e} m)")]
    InfeasibleDesign { lower: f64, upper: f64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no admissible subcarrier: tag orientation is outside RPA coverage")]
    OutOfCoverage,

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

use thiserror::Error;

/// Errors raised by the analysis engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{function}: argument {arg} outside the domain ({detail})")]
    Domain {
        function: &'static str,
        arg: f64,
        detail: &'static str,
    },

    #[error("noise uncertainty factor rho = {rho} leaves no uncertainty; detection is perfect")]
    DegenerateNoise { rho: f64 },

    #[error("antenna array with {n} elements has a non-positive side-lobe denominator")]
    DegenerateArray { n: u32 },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("quadrature did not converge on [{a}, {b}]: estimate {value:e}, error {abs_error:e} after {intervals} intervals")]
    Quadrature {
        a: f64,
        b: f64,
        value: f64,
        abs_error: f64,
        intervals: usize,
    },

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

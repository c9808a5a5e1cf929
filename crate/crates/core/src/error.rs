use thiserror::Error;

/// Errors raised by the multiplier, rate, verification and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// σ = 0 outside the (j = 0, η = 1) logarithmic exception.
    #[error("boundary case n(1/eta - 1/q) + |gamma2| - 2 theta = 0 (j = {j}, eta = {eta}); perturb q")]
    BoundaryCase { j: u8, eta: f64 },

    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("blow-up detected at t = {t}")]
    BlowUpDetected { t: f64 },

    #[error("insufficient stored coverage: need t up to R^kappa = {required_time} and |x| <= R = {radius} ({detail})")]
    InsufficientCoverage {
        required_time: f64,
        radius: f64,
        detail: String,
    },

    #[error("test functions need integer exponents (delta, theta in N, alpha in N \\ {{0}}): got {0}")]
    NonIntegerExponent(String),

    #[error("csv output failed: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("component at {frequency_hz} Hz is at or above Nyquist ({nyquist_hz} Hz)")]
    Aliasing { frequency_hz: f64, nyquist_hz: f64 },

    #[error("dimension mismatch: expected length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("refusing to densify {entries} entries (cap {cap})")]
    DenseCap { entries: usize, cap: usize },

    #[error("no signal energy")]
    NoSignalEnergy,

    #[error("empty signal subspace")]
    EmptySubspace,

    #[error("polynomial is identically zero")]
    ZeroPolynomial,

    #[error("fundamental amplitude is zero")]
    ZeroFundamental,

    #[error("singular covariance: order {order} leaves no noise subspace in dimension {dim}")]
    SingularCovariance { order: usize, dim: usize },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("input contains no samples")]
    EmptyInput,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field,
            reason: reason.into(),
        }
    }
}

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mode spec: {0}")]
    InvalidMode(String),
    #[error("invalid signal: {0}")]
    InvalidSignal(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("Fourier coefficient c_{m} = {value:e} underflows; cannot divide")]
    CoefficientUnderflow { m: i64, value: f64 },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("root finding failed: {0}")]
    RootFinding(String),
}

pub type Result<T> = std::result::Result<T, Error>;

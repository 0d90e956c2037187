use thiserror::Error;

/// Errors produced by the dcsc library.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes of two operands do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A scalar or configuration value is outside its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An input or intermediate value is NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A dictionary file does not follow the CSCD layout.
    #[error("dictionary format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// The conjugate gradient solver did not reach the requested tolerance.
    #[error("conjugate gradient did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    CgDiverged { residual: f64, iterations: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// PNG decode/encode failure or unsupported pixel layout.
    #[error("image error: {0}")]
    Image(String),
}

pub type Result<T> = std::result::Result<T, Error>;

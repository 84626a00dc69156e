use thiserror::Error;

/// Errors raised by the risk engines.
///
/// The variants are coarse on purpose: callers (the CLI in particular) map
/// them to exit codes, so what matters is whether the input was malformed,
/// the model admits arbitrage, or the numerics broke down.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MirmError {
    /// A claim, strategy or grid does not fit the model it is applied to.
    #[error("structural mismatch: {0}")]
    Structural(String),
    /// A parameter lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),
    /// The market model is degenerate or admits arbitrage.
    #[error("model error: {0}")]
    Model(String),
    /// An iterative method failed to converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Invalid user input: malformed files, out-of-range options.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl MirmError {
    pub fn is_numerical(&self) -> bool {
        matches!(self, MirmError::Numerical(_))
    }
}

impl From<serde_json::Error> for MirmError {
    fn from(e: serde_json::Error) -> Self {
        MirmError::InvalidInput(format!("json: {e}"))
    }
}

impl From<std::io::Error> for MirmError {
    fn from(e: std::io::Error) -> Self {
        MirmError::InvalidInput(format!("io: {e}"))
    }
}

pub type Result<T, E = MirmError> = std::result::Result<T, E>;

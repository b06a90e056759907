use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum HskError {
    /// A caller violated an operation precondition (bad shapes, asymmetric
    /// input, out-of-range parameters).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The input is numerically degenerate (zero diagonal, zero Frobenius
    /// norm) and the requested quantity is undefined on it.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An iterative solver failed to reach its tolerance.
    #[error("solver failure: {0}")]
    Solver(String),

    /// A persisted file does not match the documented layout.
    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HskError>;

impl HskError {
    /// Process exit code for the CLI: 2 config, 3 numerical, 4 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            HskError::Contract(_) | HskError::Config(_) => 2,
            HskError::Degenerate(_) | HskError::Solver(_) => 3,
            HskError::Format(_) | HskError::Io(_) => 4,
        }
    }
}

//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated a documented precondition (dimension mismatch,
    /// out-of-range argument, ill-posed input set, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A numeric routine produced or received a non-finite value outside
    /// of training (training aborts report `Divergence` instead).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Training was aborted by the divergence guard: the loss or a
    /// parameter became non-finite. The last finite checkpoint has been
    /// written to the run directory when one was configured.
    #[error("training diverged at iteration {iteration}: {detail}")]
    Divergence { iteration: usize, detail: String },

    /// A configuration, spec file, checkpoint, or data asset failed to parse.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand used by precondition checks.
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}

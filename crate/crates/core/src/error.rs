use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments or configuration supplied by the caller.
    #[error("usage error: {0}")]
    Usage(String),

    /// A configuration sits on the boundary of the domain, where the
    /// singular coefficients are undefined.
    #[error("configuration on the domain boundary: gap {gap:e} between particles {lower} and {upper}")]
    DomainBoundary { lower: usize, upper: usize, gap: f64 },

    /// A drift or Lyapunov evaluation inside the domain produced a
    /// non-finite value. This points at a broken problem definition.
    #[error("non-finite {quantity} inside the domain at {context}")]
    NonFinite { quantity: &'static str, context: String },

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}

//! Error type shared by every layer of the node.

use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("Cholesky factorization failed at every jitter level tried: {jitters:?}")]
    Numerical { jitters: Vec<f64> },

    #[error("internal logic error: {0}")]
    Internal(String),

    #[error("malformed reply: {0}")]
    MalformedReply(String),

    #[error("slot {slot} is locked: {what}")]
    Locked { slot: usize, what: String },

    #[error("cannot bind UDP port {port} on {ip}: {source}")]
    PortOccupied {
        ip: String,
        port: u16,
        #[source]
        source: io::Error,
    },

    #[error("{what} not found (available: {})", available.join(", "))]
    NotFound { what: String, available: Vec<String> },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Stable machine-readable code, used by the admin API and the C ABI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::InvalidConfig(_) => "invalid-config",
            Error::Numerical { .. } => "numerical",
            Error::Internal(_) => "internal",
            Error::MalformedReply(_) => "malformed-reply",
            Error::Locked { .. } => "locked-state",
            Error::PortOccupied { .. } => "port-occupied",
            Error::NotFound { .. } => "not-found",
            Error::InvalidState(_) => "invalid-state",
            Error::Io(_) => "io",
        }
    }
}

use alloc::string::String;

/// Errors raised by the numerical models.
///
/// Every variant carries the name of the operation that rejected its input so
/// callers (the batch runner in particular) can report it.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument violates the operation's domain.
    #[error("{op}: {reason}")]
    Domain { op: &'static str, reason: String },
    /// A lookup fell outside the tabulated range.
    #[error("{op}: {value} outside [{low}, {high}]")]
    OutOfRange {
        op: &'static str,
        value: f64,
        low: f64,
        high: f64,
    },
    /// Matrix or vector shapes do not line up.
    #[error("{op}: dimension mismatch ({detail})")]
    Dimension { op: &'static str, detail: String },
    /// The squinted beam has no real steering angle.
    #[error("{op}: beam split, |xi * sin(psi)| = {argument} > 1")]
    BeamSplit { op: &'static str, argument: f64 },
    /// A training protocol could not complete.
    #[error("{op}: {reason}")]
    Protocol { op: &'static str, reason: String },
}

impl Error {
    pub(crate) fn domain(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            op,
            reason: reason.into(),
        }
    }

    pub(crate) fn dimension(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    /// Name of the operation that produced the error.
    pub fn op(&self) -> &'static str {
        match self {
            Error::Domain { op, .. }
            | Error::OutOfRange { op, .. }
            | Error::Dimension { op, .. }
            | Error::BeamSplit { op, .. }
            | Error::Protocol { op, .. } => op,
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;

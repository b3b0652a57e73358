//! Error type shared by every module of the crate.

use thiserror::Error;

/// Everything that can go wrong while building, parsing or checking a system.
///
/// Security violations are *not* errors: they are reported as verdicts.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Malformed input text, with a 1-based source position.
    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    /// A name that is not declared in the relevant signature or table.
    #[error("unknown {kind} `{name}`")]
    UnknownIdentifier { kind: &'static str, name: String },
    /// Two systems that should share a signature do not.
    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),
    /// A structurally invalid system (non-total tables, missing observations, ...).
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    /// A trace longer than the bound of the result it is evaluated against.
    #[error("trace of length {length} exceeds the depth bound {depth}")]
    BoundExceeded { length: usize, depth: usize },
    /// The enumerated trace space would not fit in memory.
    #[error("{traces} traces up to depth {depth} exceed the enumeration limit")]
    TooLarge { traces: u128, depth: usize },
    /// A structured-state system violates its own structural invariants.
    #[error("structured state invariant violated: {0}")]
    Structure(String),
    /// A malformed capability configuration, action or script.
    #[error("capability model: {0}")]
    Capability(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    pub(crate) fn unknown(kind: &'static str, name: impl Into<String>) -> Self {
        Error::UnknownIdentifier {
            kind,
            name: name.into(),
        }
    }
}

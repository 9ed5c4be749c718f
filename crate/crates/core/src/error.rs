use thiserror::Error;

/// Every failure the library can report.
///
/// Variants map one-to-one onto the failure classes the CLI turns into exit
/// codes (see [`Error::class`]).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("parse error: missing section [{0}]")]
    MissingSection(String),

    #[error("invariant violated ({invariant}): {detail}")]
    Invariant {
        invariant: &'static str,
        detail: String,
    },

    #[error("input outside declared domain: {0}")]
    Domain(String),

    #[error("unsupported representation: {0}")]
    UnsupportedRepresentation(String),

    #[error("impossible observation {observation} at t={t}: zero predictive probability")]
    ImpossibleObservation { t: usize, observation: String },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("instance too large to enumerate: {count} exceeds limit {limit}")]
    TooLarge { count: u128, limit: u128 },

    #[error("belief grid resolution gap at t={t}: projection distance {distance:e} exceeds delta {delta:e}")]
    Resolution { t: usize, distance: f64, delta: f64 },

    #[error("control coefficient is zero at t={0}; the model is not invertible in u")]
    NonInvertible(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("support mismatch: {0}")]
    SupportMismatch(String),

    #[error("scenario hash mismatch: strategy was solved for {expected}, information state belongs to {found}")]
    HashMismatch { expected: String, found: String },

    #[error("history mismatch: {0}")]
    HistoryMismatch(String),

    #[error("io error: {0}")]
    Io(String),
}

/// Coarse failure class used for machine-readable CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Parse,
    Resolution,
    InsufficientData,
    Internal,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parse { .. } | Error::MissingSection(_) | Error::Invariant { .. } => {
                ErrorClass::Parse
            }
            Error::Resolution { .. } => ErrorClass::Resolution,
            Error::InsufficientData(_) => ErrorClass::InsufficientData,
            Error::Configuration(_)
            | Error::UnsupportedRepresentation(_)
            | Error::TooLarge { .. }
            | Error::HashMismatch { .. } => ErrorClass::Usage,
            _ => ErrorClass::Internal,
        }
    }

    pub(crate) fn invariant(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::Invariant {
            invariant,
            detail: detail.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter is outside its admissible range.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    /// An operation argument is outside the function's domain.
    #[error("`{name}` = {value} is outside the domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("unknown parameter name `{0}`")]
    UnknownParameter(String),

    #[error("invalid shock schedule: {0}")]
    InvalidSchedule(String),

    /// One point of a parameter sweep produced an invalid parameter set.
    #[error("sample {index} ({parameter} = {value}): {source}")]
    InvalidSample {
        index: usize,
        parameter: String,
        value: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("series has {found} points, at least {required} are required")]
    TooFewPoints { found: usize, required: usize },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("integration produced a non-finite share at t = {time}")]
    NonFinite { time: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidParameter { .. }
            | Error::Domain { .. }
            | Error::UnknownParameter(_)
            | Error::InvalidSchedule(_)
            | Error::InvalidSample { .. }
            | Error::Parse { .. }
            | Error::TooFewPoints { .. } => true,
            Error::Calibration(_) | Error::NonFinite { .. } | Error::Io(_) => false,
        }
    }
}

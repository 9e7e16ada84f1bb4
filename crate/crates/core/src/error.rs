use thiserror::Error;

/// Errors produced by the library.
///
/// The CLI maps [`Error::Config`] and [`Error::Argument`] style failures to exit
/// code 2 and numeric failures to exit code 3 (see [`Error::is_numeric`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("events out of order: event at t={time} follows t={previous}")]
    Ordering { time: f64, previous: f64 },

    #[error("no checkpoint at t={0}; window and update interval are misconfigured")]
    MissingCheckpoint(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("zero intensity at event {index} (node {node}, t={time})")]
    ZeroIntensity { index: usize, node: usize, time: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the failure is a numeric one rather than bad input or configuration.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Numeric(_) | Error::Calibration(_) | Error::ZeroIntensity { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map_or(0, |p| p.line());
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            kind => Error::Parse { line, message: format!("{kind:?}") },
        }
    }
}

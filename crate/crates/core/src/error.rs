use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("unknown gait preset `{name}` (valid: {})", valid.join(", "))]
    UnknownPreset { name: String, valid: Vec<String> },

    #[error("divergence in oscillator {oscillator}, variable `{variable}`{}", at_time(*time))]
    Divergence {
        oscillator: usize,
        variable: &'static str,
        time: Option<f64>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

fn at_time(time: Option<f64>) -> String {
    match time {
        Some(t) => format!(" at t={t:.4} s"),
        None => String::new(),
    }
}

impl Error {
    /// Process exit code for the CLI: 2 parse, 3 validation, 4 divergence, 1 other.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) => 2,
            Error::DimensionMismatch { .. }
            | Error::NonFinite(_)
            | Error::InvalidParams(_)
            | Error::InvalidSchedule(_)
            | Error::UnknownPreset { .. } => 3,
            Error::Divergence { .. } => 4,
            Error::Io(_) => 1,
        }
    }

    pub(crate) fn with_time(self, t: f64) -> Self {
        match self {
            Error::Divergence {
                oscillator,
                variable,
                time: None,
            } => Error::Divergence {
                oscillator,
                variable,
                time: Some(t),
            },
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

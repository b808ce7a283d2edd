use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("power iteration did not converge after {iters} iterations (last estimate {last})")]
    NotConverged { iters: usize, last: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("graph generation failed: {attempts} consecutive draws were disconnected")]
    Disconnected { attempts: usize },

    #[error("spectral radius {0} is too small to normalize (empty graph?)")]
    EmptyGraph(f64),

    #[error("split failed: class {class} absent from the training split after {attempts} shuffles")]
    ClassMissing { class: usize, attempts: usize },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("numerical abort: {0}")]
    NumericalAbort(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(context: &'static str, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            got,
        }
    }

    /// Process exit code used by the command-line front end.
    ///
    /// 1 usage/validation, 2 generation failure, 3 numerical abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Disconnected { .. } | Error::ClassMissing { .. } => 2,
            Error::NumericalAbort(_) | Error::NotConverged { .. } => 3,
            _ => 1,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        }
    }
}

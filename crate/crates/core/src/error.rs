use std::path::PathBuf;

/// Errors raised anywhere in the solver pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config key `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("step {step} (t = {time}) solve failed: {message}")]
    StepSolve {
        step: usize,
        time: f64,
        message: String,
    },

    /// `E1[u] + B` is not safely positive, so the SAV ratio is undefined.
    #[error("SAV denominator E1 + B = {denominator:e} is not positive (E1 = {e1:e}, B = {shift:e})")]
    SavDenominator {
        e1: f64,
        shift: f64,
        denominator: f64,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(key: &str, message: impl Into<String>) -> Self {
        Error::Validation {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// True for errors that originate in the numerical solve rather than in
    /// the configuration or the filesystem.
    pub fn is_solver_error(&self) -> bool {
        matches!(
            self,
            Error::LinearSolve(_) | Error::StepSolve { .. } | Error::SavDenominator { .. }
        )
    }

    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_) | Error::Parse { .. } | Error::Validation { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

/// Errors raised by the library, grouped by pipeline stage.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("training did not converge after {iterations} iterations (gradient norm {grad_norm:.3e}, tolerance {tol:.3e})")]
    NoConvergence {
        iterations: usize,
        grad_norm: f64,
        tol: f64,
    },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {path}: {message}")]
    Format { path: String, message: String },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Stage label used for exit codes and error reporting.
    pub fn stage(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Data(_) | Error::Format { .. } => "data",
            Error::Model(_) | Error::Training(_) | Error::NoConvergence { .. } => "training",
            Error::Calibration(_) => "calibration",
            Error::Evaluation(_) => "evaluation",
            Error::Numerical(_) => "numerical",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use std::path::PathBuf;

/// Errors produced anywhere in the simulation and analysis chain.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid parameters or configuration; `field` names the offending
    /// setting using dotted config paths where one exists.
    #[error("invalid configuration `{field}`: {message}")]
    Config { field: String, message: String },

    /// A requested time lies outside the scenario horizon.
    #[error("time {t} s outside scenario horizon [0, {horizon}] s")]
    Range { t: f64, horizon: f64 },

    /// Input data cannot be analyzed as requested.
    #[error("analysis error: {0}")]
    Analysis(String),

    /// Malformed or inconsistent data files.
    #[error("data error: {0}")]
    Data(String),

    /// A file carries a schema version this build cannot read.
    #[error("unsupported schema version {found} in {path} (expected major {expected})")]
    Schema {
        path: PathBuf,
        found: String,
        expected: u32,
    },

    /// The optimizer or another numerical stage did not produce a usable result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 1,
            Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

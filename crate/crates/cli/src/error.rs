use std::path::PathBuf;

use boltzkern::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("dataset not found: {}", .0.display())]
    MissingData(PathBuf),
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", .path.display())]
    BadJson {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::MissingData(_) => EXIT_USAGE,
            CliError::Io { .. } | CliError::BadJson { .. } => EXIT_DATA,
            CliError::Core(e) => match e {
                CoreError::Config(_) | CoreError::Capacity { .. } => EXIT_USAGE,
                CoreError::NonFinite(_) | CoreError::Sampler(_) => EXIT_NUMERIC,
                _ => EXIT_DATA,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

use std::io;
use std::path::PathBuf;

use albird_core::dataset::DatasetError;
use albird_core::experiment::LoopError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Loop(#[from] LoopError),
    #[error("{path}:{line}:{column}: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// 1 for validation and configuration errors, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Schema { .. } => 1,
            CliError::Dataset(e) => dataset_exit_code(e),
            CliError::Loop(e) => match e {
                LoopError::Dataset(d) => dataset_exit_code(d),
                LoopError::InvalidConfig(_)
                | LoopError::Strategy(_)
                | LoopError::PoolExhausted { .. }
                | LoopError::BaselineMissing(_) => 1,
                LoopError::Model(albird_core::model::ModelError::InvalidConfig(_)) => 1,
                LoopError::Model(_) | LoopError::Metric(_) | LoopError::IndexNotInPool(_) => 2,
            },
            CliError::Io { .. } => 2,
        }
    }
}

fn dataset_exit_code(e: &DatasetError) -> i32 {
    match e {
        DatasetError::Io { .. } => 2,
        _ => 1,
    }
}

//! Experiment harness for shape-routed cortex networks: configuration,
//! dataset files, the model container and CSV reports.

pub mod config;
pub mod container;
pub mod experiment;
pub mod loaders;
pub mod report;

use std::path::Path;

use thiserror::Error;

pub use config::ExperimentConfig;
pub use container::{load_model, save_model, ContainerError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Format { path: String, source: crtx_core::data::FormatError },
    #[error(transparent)]
    Data(#[from] crtx_core::data::DataError),
    #[error(transparent)]
    Cortex(#[from] crtx_core::cortex::CortexError),
    #[error(transparent)]
    Bound(#[from] crtx_core::theory::BoundError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad input: {0}")]
    Input(String),
    #[error("{0}")]
    Unsupported(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}

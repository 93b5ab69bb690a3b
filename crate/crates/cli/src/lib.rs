//! Command-line driver: data ingestion, run configuration and the staged
//! pipeline clean -> featurize -> train -> calibrate -> predict -> evaluate.

pub mod app;
pub mod config;
pub mod ingest;
pub mod pipeline;
pub mod task;

pub use config::RunConfig;
pub use ingest::{ingest, Dataset, Example, Format, Label};
pub use pipeline::{run_pipeline, Run};
pub use task::{Metric, Task, TaskTarget};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<CliError>,
    },

    #[error(transparent)]
    Core(#[from] asc_core::Error),
}

impl CliError {
    /// 1 usage, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Stage { source, .. } => source.exit_code(),
            CliError::Core(e) => match e {
                asc_core::Error::Numerical(_) => 3,
                asc_core::Error::Config(_) => 1,
                _ => 2,
            },
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            s @ CliError::Stage { .. } => s,
            other => CliError::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

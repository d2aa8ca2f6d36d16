use std::io;

use streamsketch_core::SketchError;

use crate::config::ConfigError;
use crate::io::DataError;
use crate::metrics::MetricsError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{cell}: {source}")]
    Sketch {
        cell: String,
        #[source]
        source: SketchError,
    },
    #[error("{cell}: {source}")]
    Metrics {
        cell: String,
        #[source]
        source: MetricsError,
    },
    #[error("writing results: {0}")]
    Output(#[from] io::Error),
}

impl BenchError {
    /// 2 for configuration problems, 3 for malformed data, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Sketch { .. } | BenchError::Metrics { .. } => 2,
            BenchError::Data(DataError::Io { .. }) => 2,
            BenchError::Data(_) => 3,
            BenchError::Output(_) => 1,
        }
    }
}

pub(crate) trait CellContext<T> {
    fn cell(self, cell: &str) -> Result<T, BenchError>;
}

impl<T> CellContext<T> for Result<T, SketchError> {
    fn cell(self, cell: &str) -> Result<T, BenchError> {
        self.map_err(|source| BenchError::Sketch {
            cell: cell.to_string(),
            source,
        })
    }
}

impl<T> CellContext<T> for Result<T, MetricsError> {
    fn cell(self, cell: &str) -> Result<T, BenchError> {
        self.map_err(|source| BenchError::Metrics {
            cell: cell.to_string(),
            source,
        })
    }
}

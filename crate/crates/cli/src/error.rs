use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Sim(#[from] lsimab_core::Error),

    #[error("unknown preset `{0}` (expected one of: {list})", list = crate::preset::PRESET_NAMES.join(", "))]
    UnknownPreset(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("column `{name}` not found; available columns: {}", available.join(", "))]
    MissingColumn { name: String, available: Vec<String> },

    #[error("{0} has no data rows")]
    EmptyData(PathBuf),

    #[error("plot rendering failed: {0}")]
    Plot(String),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

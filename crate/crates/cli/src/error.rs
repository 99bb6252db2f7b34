use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    /// A stage input is missing or was produced under another configuration.
    #[error("dependency error: {0}")]
    Dependency(String),

    #[error(transparent)]
    Core(#[from] mshedge_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{file}: {source}")]
    Csv { file: String, source: csv::Error },

    #[error("{file}: {source}")]
    Json { file: String, source: serde_json::Error },
}

impl CliError {
    /// Process exit status: 2 configuration, 3 dependency, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        use mshedge_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Dependency(_) => 3,
            CliError::Core(e) => match e {
                E::Config(_) | E::Input(_) | E::Parse { .. } => 2,
                E::NumericalDomain { .. } | E::Quadrature { .. } | E::Training { .. } | E::UndefinedMetric(_) => 4,
                E::Io(_) | E::Json(_) => 1,
            },
            CliError::Csv { .. } | CliError::Json { .. } => 3,
            CliError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

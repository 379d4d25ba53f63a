use std::path::PathBuf;

use metalevel::MetaError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Meta(#[from] MetaError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("{0}")]
    Config(String),
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io { path: path.into(), source }
    }

    /// Stable machine-readable category, printed as `error[<category>]`.
    pub fn category(&self) -> &'static str {
        match self {
            BenchError::Meta(e) => e.category(),
            BenchError::Io { .. } => "io",
            BenchError::Parse { .. } => "parse",
            BenchError::MissingArtifact(_) => "missing-artifact",
            BenchError::Config(_) => "config",
        }
    }
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

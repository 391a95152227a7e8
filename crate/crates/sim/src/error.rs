use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("plot {}: {message}", path.display())]
    Plot { path: PathBuf, message: String },
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl SimError {
    pub fn class(&self) -> &'static str {
        match self {
            SimError::Parse { .. } => "parse",
            SimError::Config(_) => "config",
            SimError::Io { .. } => "io",
            SimError::Csv(_) => "csv",
            SimError::Plot { .. } => "plot",
            SimError::Pool(_) => "runtime",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Parse { .. } => 2,
            SimError::Config(_) => 3,
            SimError::Io { .. } => 4,
            SimError::Csv(_) => 5,
            SimError::Plot { .. } => 6,
            SimError::Pool(_) => 7,
        }
    }
}

impl From<gewi_core::Error> for SimError {
    fn from(e: gewi_core::Error) -> Self {
        SimError::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SimError>;

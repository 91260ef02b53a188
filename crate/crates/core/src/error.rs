use thiserror::Error;

/// Errors produced anywhere in the simulator, trainer, or experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("trace parse error at line {line}: {message}")]
    TraceParse { line: usize, message: String },

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("episode already finished")]
    EpisodeDone,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("training error: {0}")]
    Training(String),

    #[error("oracle budget exceeded: {needed} sequences > budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("unknown policy: {0}")]
    UnknownPolicy(String),

    #[error("mismatched experimental conditions: {0}")]
    Mismatch(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable kind, used by the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Calibration(_) => "calibration",
            Error::Domain(_) => "domain",
            Error::Config(_) => "config",
            Error::TraceParse { .. } => "trace_parse",
            Error::InvalidAction(_) => "invalid_action",
            Error::EpisodeDone => "episode_done",
            Error::Dimension { .. } => "dimension",
            Error::Training(_) => "training",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::UnknownPolicy(_) => "unknown_policy",
            Error::Mismatch(_) => "mismatch",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("truncated input: {frames} complete frame(s) read")]
    Truncated { frames: usize },

    #[error("size error: {0}")]
    Size(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("structure error: {0}")]
    Structure(String),

    #[error("metric error ({metric}): {msg}")]
    Metric { metric: &'static str, msg: String },

    #[error("training error: {0}")]
    Training(String),

    #[error("capability error: {0}")]
    Capability(String),

    #[error("{program} exited with {status}: {stderr}")]
    Subprocess { program: String, status: String, stderr: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }
}

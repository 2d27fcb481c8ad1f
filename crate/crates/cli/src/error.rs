use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    /// Unreadable or invalid configuration.
    #[error("{0}")]
    Config(String),
    /// The model itself failed: unbounded contour, window exceeded, broken
    /// invariant.
    #[error("{0}")]
    Model(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io(_) => 2,
            RunError::Model(_) => 3,
        }
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(std::io::Error::other(e))
    }
}

impl From<serde_json::Error> for RunError {
    fn from(e: serde_json::Error) -> Self {
        RunError::Io(std::io::Error::other(e))
    }
}

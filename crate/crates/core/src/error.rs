use thiserror::Error;

use crate::io::tensor::TensorError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// OKS against a ground-truth pose with no labeled keypoints.
    #[error("similarity undefined: ground truth has no labeled keypoints")]
    UndefinedSimilarity,

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("scene generation failed: {0}")]
    Generation(String),

    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("schema: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

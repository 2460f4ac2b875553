use factcheck_core::datasets::DatasetError;
use factcheck_core::metrics::MetricsError;
use factcheck_core::providers::ProviderError;
use factcheck_core::questiongen::GenerationError;
use factcheck_core::verification::{FailureKind, PipelineError};

/// Top-level error. The variant decides the process exit code and the HTTP
/// status class.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Provider(String),
    #[error("{0}")]
    Internal(String),
}

impl AppError {
    pub fn validation(msg: impl std::fmt::Display) -> Self {
        Self::Validation(msg.to_string())
    }

    pub fn internal(msg: impl std::fmt::Display) -> Self {
        Self::Internal(msg.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 1,
            Self::Provider(_) => 2,
            Self::Internal(_) => 3,
        }
    }

    pub fn kind(&self) -> FailureKind {
        match self {
            Self::Validation(_) => FailureKind::Validation,
            Self::Provider(_) => FailureKind::Provider,
            Self::Internal(_) => FailureKind::Internal,
        }
    }
}

impl From<PipelineError> for AppError {
    fn from(e: PipelineError) -> Self {
        let msg = e.to_string();
        match e.kind {
            FailureKind::Validation => Self::Validation(msg),
            FailureKind::Provider => Self::Provider(msg),
            FailureKind::Internal => Self::Internal(msg),
        }
    }
}

impl From<GenerationError> for AppError {
    fn from(e: GenerationError) -> Self {
        match e {
            GenerationError::Validation(_) => Self::Validation(e.to_string()),
            GenerationError::Provider { .. } => Self::Provider(e.to_string()),
        }
    }
}

impl From<DatasetError> for AppError {
    fn from(e: DatasetError) -> Self {
        Self::Validation(e.to_string())
    }
}

impl From<MetricsError> for AppError {
    fn from(e: MetricsError) -> Self {
        Self::Validation(e.to_string())
    }
}

impl From<ProviderError> for AppError {
    fn from(e: ProviderError) -> Self {
        Self::Provider(e.to_string())
    }
}

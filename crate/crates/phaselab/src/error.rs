use std::io;

use phaselab_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

impl HarnessError {
    /// Invalid inputs map to [`EXIT_CONFIG`], everything else to
    /// [`EXIT_RUNTIME`].
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Json(_) => EXIT_CONFIG,
            HarnessError::Core(
                CoreError::Config(_)
                | CoreError::InvalidDescriptor(_)
                | CoreError::InvalidDistribution(_)
                | CoreError::InvalidExponent(_)
                | CoreError::FieldMismatch { .. }
                | CoreError::DimensionMismatch { .. },
            ) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }
}

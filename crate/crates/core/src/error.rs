use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("field mismatch: ensemble is {ensemble:?}, caller requested {requested:?}")]
    FieldMismatch {
        ensemble: crate::FieldTag,
        requested: crate::FieldTag,
    },
    #[error("matrix is not symmetric/Hermitian (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("lifting exponent {0} outside [1/2, 1]")]
    InvalidExponent(f64),
    #[error("invalid set descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("eigensolver did not converge")]
    EigenFailure,
    #[error("could not draw a non-degenerate sample after {0} attempts")]
    DegenerateSample(usize),
    #[error("every sampled pair was equivalent; the set is degenerate")]
    DegenerateSet,
    #[error("objective or iterate became non-finite")]
    NonFinite,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("targets are in the same phase equivalence class (distance {0:e})")]
    EquivalentTargets(f64),
    #[error("perturbation is zero")]
    ZeroPerturbation,
}

//! Phaseless and rank-one measurement operators over real and complex
//! fields, empirical `l_q` risk minimization for phase retrieval and
//! structured matrix restoration, and Monte Carlo estimators for the
//! stability, injectivity, embedding, chaos-process and adversarial
//! sharpness quantities that govern them.
//!
//! Everything is generic over [`Scalar`], implemented for `f64` and
//! [`Complex64`]. Randomness is always derived from an explicit `u64` seed
//! through independent per-row / per-trial streams, so results never depend
//! on thread scheduling.

pub mod adversarial;
pub mod ensembles;
mod error;
pub mod field;
pub mod geometry;
pub mod linalg;
pub mod rng;
pub mod solvers;
pub mod stability;
pub mod stats;

pub use adversarial::{AdversarialInstance, SharpnessMode, SharpnessRow};
pub use ensembles::{Distribution, EnsembleSpec, MeasurementMatrix, MomentReport};
pub use error::{Error, Result};
pub use field::{FieldTag, Scalar};
pub use geometry::{MatrixSetDescriptor, PhaseDistancePair, SampleMode, VectorSetDescriptor};
pub use num_complex::Complex64;
pub use solvers::{Init, SolverConfig, SolverReport};
pub use stability::{CertificateEstimate, CertificateKind, ChaosVariant};

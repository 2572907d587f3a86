//! Verification operators: a discrete Bogovskii right inverse of the
//! divergence, Korn and Poincaré constants, the solenoidal test-field
//! projector, and the suites that exercise them.

pub mod bogovskii;
pub mod korn;
pub mod projector;
pub mod verify;

use serde::{Deserialize, Serialize};

pub use bogovskii::{bogovskii, remove_mean, BogovskiiResult};
pub use korn::{korn_constant, korn_identity_residual, poincare_constant, random_zero_trace, KornEstimate, KornKind};
pub use projector::{project_solenoidal_testfield, ProjectorConfig, ProjectorReport, TestField};
pub use verify::{run_suite, Suite, SuiteReport, VerifyOptions, VerifyReport};

/// Observed constants of one mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConstants {
    pub c_bogovskii: f64,
    pub c_korn: f64,
    pub c_poincare: f64,
    pub mesh_size: f64,
}

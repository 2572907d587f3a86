//! Shear-thinning incompressible flow in moving domains.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`] sparse storage and a direct LU factorization,
//! * [`geometry`] admissible domains, driving velocity fields and flow maps,
//! * [`rheology`] the power-law stress, its regularization and the hemolysis index,
//! * [`discretization`] moving P2/P1 meshes, quadrature, Piola maps and assembly,
//! * [`solver`] the ALE time stepper with Picard iteration and energy ledger,
//! * [`functionals`] shape functionals evaluated on space-time solutions,
//! * [`optimizer`] a derivative-free minimizing loop over admissible parameters,
//! * [`analysis`] Bogovskii, Korn and Poincaré operators plus the solenoidal projector,
//! * [`config`] and [`cli`] for run orchestration.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::large_enum_variant)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod discretization;
pub mod error;
pub mod functionals;
pub mod geometry;
pub mod linalg;
pub mod optimizer;
pub mod rheology;
pub mod solver;

pub use error::{Error, Result};

/// Schema version of the JSON run configuration.
pub const SCHEMA_VERSION: u32 = 1;

pub type Point = [f64; 2];

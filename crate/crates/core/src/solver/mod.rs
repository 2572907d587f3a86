//! Forward solver: ALE backward Euler with Picard linearization, continuation
//! in the regularization parameter M, the energy ledger and its a-priori
//! bound, solver ensembles and manufactured-solution verification.

pub mod config;
pub mod energy;
pub mod ensemble;
pub mod forward;
pub mod mms;

pub use config::{BodyForce, ForceField, InitialData, InitialMode, PicardInit, SolverConfig};
pub use energy::{
    box_poincare_constant, energy_bound, energy_check, BoundInputs, EnergyBound, EnergyCheck, EnergyLedger,
    LedgerRecord,
};
pub use ensemble::{solve_ensemble, EnsembleOutcome};
pub use forward::{boundary_lift, solve_forward, ForwardProblem, ForwardSolution, PicardRecord};

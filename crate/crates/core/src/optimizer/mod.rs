//! Derivative-free minimization of a shape functional over a finite
//! parametrization of admissible domains and driving fields.

pub mod objective;
pub mod params;
pub mod search;

pub use objective::{AreaObjective, EvalContext, Evaluation, FlowRun, FlowSetup, Objective};
pub use params::{Decoded, ParamSpace, ParamVector};
pub use search::{minimize, BestPoint, HistoryEntry, OptimizerConfig, OptimizerState, SENTINEL};

use crate::error::{Error, Result};
use crate::geometry::StreamBump;
use crate::Point;
use serde::{Deserialize, Serialize};

/// Starting guess of the Picard iteration on each layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PicardInit {
    /// Previous time layer, or the same layer of the previous M when warm starting.
    #[default]
    PreviousStep,
    /// The boundary lift of the driving field (w = 0).
    BoundaryLift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    #[serde(default = "default_picard_max")]
    pub picard_max: usize,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    /// Overrides the rheology's continuation schedule when present.
    #[serde(default)]
    pub m_schedule: Option<Vec<f64>>,
    #[serde(default)]
    pub picard_init: PicardInit,
    #[serde(default)]
    pub seed_id: u64,
    #[serde(default = "default_quadrature")]
    pub quadrature_degree: usize,
}

fn default_picard_max() -> usize {
    50
}

fn default_picard_tol() -> f64 {
    1e-10
}

fn default_quadrature() -> usize {
    4
}

impl SolverConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            picard_max: default_picard_max(),
            picard_tol: default_picard_tol(),
            m_schedule: None,
            picard_init: PicardInit::default(),
            seed_id: 0,
            quadrature_degree: default_quadrature(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::Config(format!("picard_tol must be positive, got {}", self.picard_tol)));
        }
        if self.picard_max == 0 {
            return Err(Error::Config("picard_max must be at least 1".into()));
        }
        if !(1..=5).contains(&self.quadrature_degree) {
            return Err(Error::Config(format!(
                "quadrature_degree must be in 1..=5, got {}",
                self.quadrature_degree
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialMode {
    /// u₀ = V(0) up to the discrete divergence correction.
    #[default]
    MatchV,
    /// V(0) plus a solenoidal perturbation supported inside Ω.
    Perturbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct InitialData {
    #[serde(default)]
    pub mode: InitialMode,
    /// Stream-function bumps of the perturbation, evaluated at t = 0.
    #[serde(default)]
    pub perturbation: Vec<StreamBump>,
}

impl InitialData {
    pub fn match_v() -> Self {
        Self::default()
    }
}

/// Body force f(t, x).
pub type ForceField<'a> = &'a (dyn Fn(f64, Point) -> [f64; 2] + Sync);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BodyForce {
    #[default]
    None,
    Constant { value: [f64; 2] },
}

impl BodyForce {
    pub fn eval(&self, _t: f64, _x: Point) -> [f64; 2] {
        match self {
            BodyForce::None => [0.0; 2],
            BodyForce::Constant { value } => *value,
        }
    }

    /// ‖f‖^{s}_{L^{s}(𝔔)} over a space-time cylinder of the given volume.
    pub fn norm_power(&self, s: f64, cylinder_volume: f64) -> f64 {
        match self {
            BodyForce::None => 0.0,
            BodyForce::Constant { value } => {
                (value[0] * value[0] + value[1] * value[1]).sqrt().powf(s) * cylinder_volume
            }
        }
    }
}

//! Nonnegative space-time functionals j(Ω, V; u) and their ensemble
//! minimum, the finite stand-in for the infimum over all solutions.
//!
//! Every kernel is a square or an absolute power, so values are nonnegative
//! by construction. A new kind must also be lower semicontinuous under the
//! weak convergences of the solution class; that cannot be checked
//! numerically and is left to whoever adds the kind.

use crate::discretization::assembly::{frob, sym};
use crate::discretization::integrate::{spacetime_integrate, QuadPoint};
use crate::discretization::{FlowState, MovingMesh, TriangleRule};
use crate::error::{Error, Result};
use crate::geometry::{DrivingField, VelocityFieldSpec};
use crate::rheology::{hemolysis_from_norm, ExponentWindow, HemolysisParams, RheologyParams};
use crate::Point;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    /// ∫∫ |c_h |S(Du)|^α t^β|^r.
    HemolysisR,
    /// ∫∫ S(Du):Du.
    Dissipation,
    /// ∫∫ |u − target|².
    Tracking,
}

/// Reference velocity of the tracking functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrackingTarget {
    Constant { value: [f64; 2] },
    /// Rigid rotation ω (−(y − c_y), x − c_x).
    Rotation { center: Point, omega: f64 },
    /// The driving field V itself.
    Driving,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSpec {
    pub kind: FunctionalKind,
    #[serde(default)]
    pub hemolysis: Option<HemolysisParams>,
    #[serde(default)]
    pub target: Option<TrackingTarget>,
    #[serde(default = "default_degree")]
    pub quadrature_degree: usize,
}

fn default_degree() -> usize {
    4
}

impl FunctionalSpec {
    pub fn hemolysis(hp: HemolysisParams) -> Self {
        Self {
            kind: FunctionalKind::HemolysisR,
            hemolysis: Some(hp),
            target: None,
            quadrature_degree: default_degree(),
        }
    }

    pub fn dissipation() -> Self {
        Self {
            kind: FunctionalKind::Dissipation,
            hemolysis: None,
            target: None,
            quadrature_degree: default_degree(),
        }
    }

    pub fn tracking(target: TrackingTarget) -> Self {
        Self {
            kind: FunctionalKind::Tracking,
            hemolysis: None,
            target: Some(target),
            quadrature_degree: default_degree(),
        }
    }
}

/// Result of [`validate_spec`]: the hemolysis exponent window when relevant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecCertificate {
    pub kind: FunctionalKind,
    pub window: Option<ExponentWindow>,
}

pub fn validate_spec(spec: &FunctionalSpec, rp: &RheologyParams) -> Result<SpecCertificate> {
    if !(1..=5).contains(&spec.quadrature_degree) {
        return Err(Error::Config(format!(
            "functional quadrature_degree must be in 1..=5, got {}",
            spec.quadrature_degree
        )));
    }
    let window = match spec.kind {
        FunctionalKind::HemolysisR => {
            let hp = spec
                .hemolysis
                .as_ref()
                .ok_or_else(|| Error::Config("hemolysis_r functional needs hemolysis parameters".into()))?;
            Some(hp.validate(rp.q)?)
        }
        FunctionalKind::Tracking => {
            if spec.target.is_none() {
                return Err(Error::Config("tracking functional needs a target field".into()));
            }
            None
        }
        FunctionalKind::Dissipation => None,
    };
    Ok(SpecCertificate { kind: spec.kind, window })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValue {
    pub value: f64,
    pub ensemble_values: Vec<f64>,
    /// Index of the minimizing ensemble member.
    pub argmin: usize,
    /// Spatial integral per layer for the minimizing member.
    pub breakdown: Vec<f64>,
}

impl FunctionalValue {
    /// max − min over the ensemble.
    pub fn spread(&self) -> f64 {
        let max = self.ensemble_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max - self.value
    }
}

fn check_state(mm: &MovingMesh, s: &FlowState, i: usize) -> Result<()> {
    let ok = s.layers() == mm.layers()
        && s.velocity.iter().all(|v| v.len() == mm.n_nodes())
        && s.times.iter().enumerate().all(|(l, &t)| (t - mm.grid.time(l)).abs() <= 1e-9 * mm.grid.horizon().max(1.0));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "state {i} does not match the moving mesh ({} layers, {} nodes)",
            mm.layers(),
            mm.n_nodes()
        )))
    }
}

/// Pointwise kernel of a functional.
pub fn kernel(spec: &FunctionalSpec, rp: &RheologyParams, v: Option<&VelocityFieldSpec>, qp: &QuadPoint) -> f64 {
    match spec.kind {
        FunctionalKind::HemolysisR => {
            let hp = spec.hemolysis.as_ref().expect("validated");
            let d = frob(&sym(&qp.grad));
            let s = rp.viscosity(d, 0.0) * d;
            hemolysis_from_norm(s, qp.t, hp).abs().powf(hp.r)
        }
        FunctionalKind::Dissipation => {
            let d = frob(&sym(&qp.grad));
            rp.viscosity(d, 0.0) * d * d
        }
        FunctionalKind::Tracking => {
            let target = match spec.target.as_ref().expect("validated") {
                TrackingTarget::Constant { value } => *value,
                TrackingTarget::Rotation { center, omega } => {
                    [-omega * (qp.x[1] - center[1]), omega * (qp.x[0] - center[0])]
                }
                TrackingTarget::Driving => v.map_or([0.0; 2], |v| v.velocity(qp.t, qp.x)),
            };
            (qp.u[0] - target[0]).powi(2) + (qp.u[1] - target[1]).powi(2)
        }
    }
}

/// Evaluates the functional on every state and keeps the minimum.
pub fn evaluate(
    spec: &FunctionalSpec,
    mm: &MovingMesh,
    states: &[FlowState],
    rp: &RheologyParams,
    velocity: Option<&VelocityFieldSpec>,
) -> Result<FunctionalValue> {
    validate_spec(spec, rp)?;
    if states.is_empty() {
        return Err(Error::InvalidInput("no states to evaluate".into()));
    }
    for (i, s) in states.iter().enumerate() {
        check_state(mm, s, i)?;
    }
    let rule = TriangleRule::of_degree(spec.quadrature_degree);
    let results: Vec<_> = states
        .par_iter()
        .map(|s| spacetime_integrate(mm, s, &rule, &|qp: &QuadPoint| kernel(spec, rp, velocity, qp)))
        .collect();
    let ensemble_values: Vec<f64> = results.iter().map(|r| r.total.max(0.0)).collect();
    if let Some(i) = ensemble_values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("functional value of ensemble member {i}")));
    }
    let mut argmin = 0;
    for (i, v) in ensemble_values.iter().enumerate() {
        if *v < ensemble_values[argmin] {
            argmin = i;
        }
    }
    Ok(FunctionalValue {
        value: ensemble_values[argmin],
        breakdown: results[argmin].per_layer.clone(),
        ensemble_values,
        argmin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(r: f64) -> HemolysisParams {
        HemolysisParams {
            c_h: 3.62e-5,
            alpha: 2.42,
            beta: 0.785,
            r,
        }
    }

    #[test]
    fn exponent_window() {
        let rp = RheologyParams::new(1.22, 61.0, vec![]).unwrap();
        let cert = validate_spec(&FunctionalSpec::hemolysis(hp(2.0)), &rp).unwrap();
        let w = cert.window.unwrap();
        let qc = 1.22 / 0.22;
        assert!((w.r_upper - qc / 2.42).abs() < 1e-12);
        assert!((w.r_upper - 2.29).abs() < 5e-3);
        let err = validate_spec(&FunctionalSpec::hemolysis(hp(3.0)), &rp).unwrap_err();
        assert!(err.to_string().contains("2.29"));
    }

    #[test]
    fn alpha_at_conjugate_with_unit_r() {
        let rp = RheologyParams::new(1.5, 5.0, vec![]).unwrap();
        let spec = FunctionalSpec::hemolysis(HemolysisParams {
            c_h: 1.0,
            alpha: 3.0,
            beta: 1.0,
            r: 1.0,
        });
        assert!(validate_spec(&spec, &rp).is_ok());
    }

    #[test]
    fn tracking_needs_target() {
        let mut s = FunctionalSpec::dissipation();
        s.kind = FunctionalKind::Tracking;
        assert!(validate_spec(&s, &RheologyParams::newtonian()).is_err());
    }
}

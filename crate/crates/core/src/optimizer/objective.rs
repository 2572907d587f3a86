use crate::discretization::{build_reference_mesh, MeshResolution, MovingMesh};
use crate::error::{Error, Result};
use crate::functionals::{evaluate, validate_spec, FunctionalSpec, FunctionalValue};
use crate::geometry::{DomainSpec, HoldAll, TimeGrid, VelocityFieldSpec};
use crate::rheology::RheologyParams;
use crate::solver::{solve_ensemble, BodyForce, EnsembleOutcome, ForwardProblem, InitialData, SolverConfig};
use crate::Point;
use serde::{Deserialize, Serialize};

/// Where in the search an evaluation happens.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalContext {
    pub evaluation: usize,
    /// Number of strict improvements of the best value so far.
    pub improvements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: f64,
    pub functional: Option<FunctionalValue>,
}

impl Evaluation {
    pub fn scalar(value: f64) -> Self {
        Self { value, functional: None }
    }
}

/// Objective on admissible pairs (Ω, V). Errors are turned into a sentinel
/// by the optimizer.
pub trait Objective: Sync {
    fn evaluate(&self, domain: &DomainSpec, velocity: &VelocityFieldSpec, ctx: EvalContext) -> Result<Evaluation>;
}

/// |area(Ω) − target|^exponent from the exact Fourier area; no flow solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaObjective {
    pub target: f64,
    #[serde(default = "one")]
    pub exponent: f64,
}

fn one() -> f64 {
    1.0
}

impl Objective for AreaObjective {
    fn evaluate(&self, domain: &DomainSpec, _: &VelocityFieldSpec, _: EvalContext) -> Result<Evaluation> {
        Ok(Evaluation::scalar((domain.area() - self.target).abs().powf(self.exponent)))
    }
}

/// Everything needed to go from (Ω, V) to a functional value.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSetup {
    pub hold_all: HoldAll,
    pub rheology: RheologyParams,
    pub functional: FunctionalSpec,
    pub resolution: MeshResolution,
    pub dt_ode: f64,
    pub quality_floor: f64,
    pub initial: InitialData,
    pub force: BodyForce,
    pub ensemble: Vec<SolverConfig>,
    /// Grow the ensemble by one member every this many improvements,
    /// starting from one member. `None` uses the full ensemble throughout.
    pub grow_every: Option<usize>,
}

/// Result of one full forward pipeline.
#[derive(Debug, Clone)]
pub struct FlowRun {
    pub mesh: MovingMesh,
    pub outcome: EnsembleOutcome,
    pub value: FunctionalValue,
}

impl FlowSetup {
    pub fn validate(&self) -> Result<()> {
        self.rheology.validate()?;
        validate_spec(&self.functional, &self.rheology)?;
        let first = self
            .ensemble
            .first()
            .ok_or_else(|| Error::Config("solver ensemble is empty".into()))?;
        for (i, c) in self.ensemble.iter().enumerate() {
            c.validate()?;
            if c.dt != first.dt {
                return Err(Error::Config(format!(
                    "ensemble member {i} has dt = {}, member 0 has {}",
                    c.dt, first.dt
                )));
            }
        }
        if !(self.dt_ode > 0.0) {
            return Err(Error::Config(format!("dt_ode must be positive, got {}", self.dt_ode)));
        }
        if self.grow_every == Some(0) {
            return Err(Error::Config("grow_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn members_at(&self, ctx: EvalContext) -> usize {
        match self.grow_every {
            None => self.ensemble.len(),
            Some(k) => (1 + ctx.improvements / k).min(self.ensemble.len()),
        }
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.hold_all.horizon, self.ensemble[0].dt)
    }

    /// Mesh, transport, ensemble solve and functional evaluation.
    pub fn run(&self, domain: &DomainSpec, velocity: &VelocityFieldSpec, members: usize) -> Result<FlowRun> {
        self.validate()?;
        let grid = self.time_grid()?;
        let reference = build_reference_mesh(domain, self.resolution)?;
        let mesh = MovingMesh::transport(reference, velocity, &self.hold_all, grid, self.dt_ode, self.quality_floor)?;
        let force = |t: f64, x: Point| self.force.eval(t, x);
        let problem = ForwardProblem {
            mesh: &mesh,
            drive: velocity,
            rheology: &self.rheology,
            initial: &self.initial,
            hold_all: &self.hold_all,
            force: &force,
        };
        let configs = &self.ensemble[..members.clamp(1, self.ensemble.len())];
        let outcome = solve_ensemble(&problem, configs)?;
        let states: Vec<_> = outcome.solutions().map(|s| s.state.clone()).collect();
        let value = evaluate(&self.functional, &mesh, &states, &self.rheology, Some(velocity))?;
        Ok(FlowRun { mesh, outcome, value })
    }
}

impl Objective for FlowSetup {
    fn evaluate(&self, domain: &DomainSpec, velocity: &VelocityFieldSpec, ctx: EvalContext) -> Result<Evaluation> {
        let run = self.run(domain, velocity, self.members_at(ctx))?;
        Ok(Evaluation {
            value: run.value.value,
            functional: Some(run.value),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainParams, Polygon};

    #[test]
    fn area_objective_matches_polygon_area() {
        let h = HoldAll::new([-2.0, -2.0], [2.0, 2.0], 1.0).unwrap();
        let mut dp = DomainParams::disk([0.1, -0.2], 1.0);
        dp.radial_coeffs.cos = vec![0.1, 0.05];
        dp.radial_coeffs.sin = vec![-0.08, 0.0];
        let d = DomainSpec::certify(dp, &h).unwrap();
        let v = VelocityFieldSpec::zero(&h, 1.0);
        let target = std::f64::consts::FRAC_PI_2;
        let got = AreaObjective { target, exponent: 1.0 }
            .evaluate(&d, &v, EvalContext::default())
            .unwrap()
            .value;
        let poly: Polygon = d.polygon(20000);
        // The inscribed polygon underestimates the area by O(n⁻²).
        assert!((got - (poly.area() - target).abs()).abs() < 1e-6);
    }
}

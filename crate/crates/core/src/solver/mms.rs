//! Manufactured solutions on the unit square.
//!
//! The velocity is u = σ(t) rot Ψ with Ψ = xy + ε sin(πx) sin(πy)/π and the
//! pressure is π* = σ(t) cos(πx) cos(πy). Then Du = σ a diag(1, −1) with
//! a = 1 + επ cos(πx) cos(πy) > 0 for ε < 1/π, so |Du| never vanishes and the
//! power-law stress is smooth. The forcing is obtained by substituting u and
//! π* into the momentum equation by hand.

use super::config::SolverConfig;
use super::forward::{solve_forward, ForwardProblem};
use super::config::InitialData;
use crate::discretization::integrate::layer_integral;
use crate::discretization::{LayerGeometry, MovingMesh, TriMesh, TriangleRule};
use crate::error::Result;
use crate::geometry::{DrivingField, HoldAll, TimeGrid};
use crate::rheology::RheologyParams;
use crate::Point;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeProfile {
    /// σ = 1 + t; backward Euler is exact in time.
    Linear,
    /// σ = 1 + sin(ωt)/2.
    Oscillating { omega: f64 },
}

impl TimeProfile {
    fn eval(&self, t: f64) -> (f64, f64) {
        match *self {
            TimeProfile::Linear => (1.0 + t, 1.0),
            TimeProfile::Oscillating { omega } => (1.0 + 0.5 * (omega * t).sin(), 0.5 * omega * (omega * t).cos()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manufactured {
    pub rheology: RheologyParams,
    pub inv_m: f64,
    pub epsilon: f64,
    pub profile: TimeProfile,
}

impl Manufactured {
    pub fn new(rheology: RheologyParams, profile: TimeProfile) -> Self {
        Self {
            rheology,
            inv_m: 0.0,
            epsilon: 0.25,
            profile,
        }
    }

    fn spatial(&self, x: Point) -> ([f64; 2], [[f64; 2]; 2], f64, [f64; 2]) {
        let e = self.epsilon;
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        let psi_x = x[1] + e * cx * sy;
        let psi_y = x[0] + e * sx * cy;
        let psi_xx = -e * PI * sx * sy;
        let psi_xy = 1.0 + e * PI * cx * cy;
        let u = [psi_y, -psi_x];
        let grad = [[psi_xy, psi_xx], [-psi_xx, -psi_xy]];
        let a_grad = [-e * PI * PI * sx * cy, -e * PI * PI * cx * sy];
        (u, grad, psi_xy, a_grad)
    }

    pub fn pressure(&self, t: f64, x: Point) -> f64 {
        self.profile.eval(t).0 * (PI * x[0]).cos() * (PI * x[1]).cos()
    }

    pub fn force(&self, t: f64, x: Point) -> [f64; 2] {
        let (sig, dsig) = self.profile.eval(t);
        let (u, g, a, ag) = self.spatial(x);
        let (q, p) = (self.rheology.q, self.rheology.p);
        let s = 2f64.sqrt() * sig * a;
        let nu = self.rheology.viscosity(s, self.inv_m);
        let mut dnu = (q - 2.0) * (1.0 + s).powf(q - 3.0);
        if self.inv_m != 0.0 {
            dnu += self.inv_m * (p - 2.0) * (1.0 + s).powf(p - 3.0);
        }
        let k = (nu + dnu * s) * sig;
        let div_s = [k * ag[0], -k * ag[1]];
        let conv = [u[0] * g[0][0] + u[1] * g[0][1], u[0] * g[1][0] + u[1] * g[1][1]];
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        let grad_p = [-PI * sig * sx * cy, -PI * sig * cx * sy];
        std::array::from_fn(|i| dsig * u[i] + sig * sig * conv[i] - div_s[i] + grad_p[i])
    }
}

impl DrivingField for Manufactured {
    fn velocity(&self, t: f64, x: Point) -> [f64; 2] {
        let sig = self.profile.eval(t).0;
        let (u, ..) = self.spatial(x);
        [sig * u[0], sig * u[1]]
    }

    fn stream(&self, t: f64, x: Point) -> f64 {
        let sig = self.profile.eval(t).0;
        sig * (x[0] * x[1] + self.epsilon * (PI * x[0]).sin() * (PI * x[1]).sin() / PI)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmsRun {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    /// L²(0, T; L²) velocity error, trapezoid in time.
    pub error_l2l2: f64,
    pub max_divergence: f64,
}

/// Solves on an n×n unit-square mesh and measures the velocity error.
pub fn run_mms(man: &Manufactured, n: usize, horizon: f64, cfg: &SolverConfig) -> Result<MmsRun> {
    let mesh = TriMesh::rectangle([0.0, 0.0], [1.0, 1.0], n, n);
    let grid = TimeGrid::new(horizon, cfg.dt)?;
    let mm = MovingMesh::fixed(mesh, grid)?;
    let hold_all = HoldAll::new([0.0, 0.0], [1.0, 1.0], horizon)?;
    let init = InitialData::match_v();
    let force = |t: f64, x: Point| man.force(t, x);
    let mut rheology = man.rheology.clone();
    rheology.m_schedule.clear();
    let mut cfg = cfg.clone();
    cfg.m_schedule = (man.inv_m != 0.0).then(|| vec![1.0 / man.inv_m]);
    let problem = ForwardProblem {
        mesh: &mm,
        drive: man,
        rheology: &rheology,
        initial: &init,
        hold_all: &hold_all,
        force: &force,
    };
    let sol = solve_forward(&problem, &cfg)?;
    let rule = TriangleRule::of_degree(5);
    let weights = crate::discretization::integrate::trapezoid_weights(grid.dt, grid.layers());
    let nodes = mm.layer_nodes(0);
    let geom = LayerGeometry::new(&mm.layout, &nodes);
    let mut err2 = 0.0;
    for l in 0..grid.layers() {
        let e = layer_integral(&geom, &rule, sol.state.times[l], &sol.state.velocity[l], &|qp| {
            let ex = man.velocity(qp.t, qp.x);
            (qp.u[0] - ex[0]).powi(2) + (qp.u[1] - ex[1]).powi(2)
        });
        err2 += weights[l] * e;
    }
    Ok(MmsRun {
        n,
        h: 1.0 / n as f64,
        dt: cfg.dt,
        error_l2l2: err2.sqrt(),
        max_divergence: sol.ledger.max_divergence(),
    })
}

/// log(e_i / e_{i+1}) / log(x_i / x_{i+1}) for consecutive runs.
pub fn observed_orders(sizes: &[f64], errors: &[f64]) -> Vec<f64> {
    sizes
        .windows(2)
        .zip(errors.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central differences of the exact fields reproduce the hand-derived forcing.
    #[test]
    fn forcing_matches_finite_differences() {
        let man = Manufactured::new(RheologyParams::new(1.5, 5.0, vec![]).unwrap(), TimeProfile::Linear);
        let (t, x) = (0.3, [0.37, 0.61]);
        let h = 1e-5;
        let stress = |x: Point| {
            let e = 1e-6;
            let du = |i: usize, j: usize| {
                let mut a = x;
                let mut b = x;
                a[j] += e;
                b[j] -= e;
                (man.velocity(t, a)[i] - man.velocity(t, b)[i]) / (2.0 * e)
            };
            let d = [[du(0, 0), 0.5 * (du(0, 1) + du(1, 0))], [0.5 * (du(0, 1) + du(1, 0)), du(1, 1)]];
            let n = (d[0][0].powi(2) + 2.0 * d[0][1].powi(2) + d[1][1].powi(2)).sqrt();
            let nu = man.rheology.viscosity(n, 0.0);
            [[nu * d[0][0], nu * d[0][1]], [nu * d[1][0], nu * d[1][1]]]
        };
        let mut div_s = [0.0; 2];
        for j in 0..2 {
            let mut a = x;
            let mut b = x;
            a[j] += h;
            b[j] -= h;
            let (sa, sb) = (stress(a), stress(b));
            for i in 0..2 {
                div_s[i] += (sa[i][j] - sb[i][j]) / (2.0 * h);
            }
        }
        let u = man.velocity(t, x);
        let ut = {
            let (a, b) = (man.velocity(t + h, x), man.velocity(t - h, x));
            [(a[0] - b[0]) / (2.0 * h), (a[1] - b[1]) / (2.0 * h)]
        };
        let grad = |i: usize, j: usize| {
            let mut a = x;
            let mut b = x;
            a[j] += h;
            b[j] -= h;
            (man.velocity(t, a)[i] - man.velocity(t, b)[i]) / (2.0 * h)
        };
        let gp = |j: usize| {
            let mut a = x;
            let mut b = x;
            a[j] += h;
            b[j] -= h;
            (man.pressure(t, a) - man.pressure(t, b)) / (2.0 * h)
        };
        let f = man.force(t, x);
        for i in 0..2 {
            let expect = ut[i] + u[0] * grad(i, 0) + u[1] * grad(i, 1) - div_s[i] + gp(i);
            assert!((f[i] - expect).abs() < 1e-4, "{i}: {} vs {expect}", f[i]);
        }
    }

    #[test]
    fn stream_matches_velocity() {
        let man = Manufactured::new(RheologyParams::newtonian(), TimeProfile::Oscillating { omega: 3.0 });
        let (t, x, h) = (0.2, [0.3, 0.8], 1e-6);
        let v = man.velocity(t, x);
        let dy = (man.stream(t, [x[0], x[1] + h]) - man.stream(t, [x[0], x[1] - h])) / (2.0 * h);
        let dx = (man.stream(t, [x[0] + h, x[1]]) - man.stream(t, [x[0] - h, x[1]])) / (2.0 * h);
        assert!((v[0] - dy).abs() < 1e-8 && (v[1] + dx).abs() < 1e-8);
    }
}

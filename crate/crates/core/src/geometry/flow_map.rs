use super::domain::HoldAll;
use super::velocity::VelocityFieldSpec;
use crate::error::{Error, Result};
use crate::Point;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

/// Uniform time grid t_i = i·dt, i = 0..=n_steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && horizon > 0.0) {
            return Err(Error::Config(format!("need dt > 0 and T > 0 (dt {dt}, T {horizon})")));
        }
        let n = (horizon / dt).round();
        if n < 1.0 || (n * dt - horizon).abs() > 1e-9 * horizon {
            return Err(Error::Config(format!("dt = {dt} does not divide T = {horizon}")));
        }
        Ok(Self {
            dt,
            n_steps: n as usize,
        })
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.n_steps)
    }

    pub fn layers(&self) -> usize {
        self.n_steps + 1
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.time(i)).collect()
    }

    /// Index of the grid time equal to `t`, if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = (t / self.dt).round();
        if k >= 0.0 && (k as usize) <= self.n_steps && (k * self.dt - t).abs() <= 1e-12 * self.dt.max(1.0) {
            Some(k as usize)
        } else {
            None
        }
    }
}

/// Sampled flow map φ(tᵢ, x) and Jacobian ∇φ(tᵢ, x) for a fixed set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    pub grid: TimeGrid,
    pub dt_ode: f64,
    /// `positions[layer][point]`
    pub positions: Vec<Vec<Point>>,
    /// `jacobians[layer][point]`, entry `[i][j]` = ∂_j φ_i
    pub jacobians: Vec<Vec<Mat2>>,
}

impl FlowMap {
    pub fn n_points(&self) -> usize {
        self.positions[0].len()
    }

    /// Largest |det ∇φ − 1| over all samples.
    pub fn max_det_defect(&self) -> f64 {
        self.jacobians
            .iter()
            .flatten()
            .map(|f| (det(f) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest condition number of the sampled Jacobians.
    pub fn max_condition(&self) -> f64 {
        self.jacobians
            .iter()
            .flatten()
            .map(condition_number)
            .fold(1.0, f64::max)
    }
}

/// Integrates φ and ∇φ for every point across the grid with classical RK4
/// substeps of length at most `dt_ode`.
pub fn integrate_flow_map(
    v: &VelocityFieldSpec,
    hold_all: &HoldAll,
    points: &[Point],
    grid: TimeGrid,
    dt_ode: f64,
) -> Result<FlowMap> {
    if !(dt_ode > 0.0) {
        return Err(Error::Config(format!("dt_ode must be positive, got {dt_ode}")));
    }
    for p in points {
        if !hold_all.contains(*p) {
            return Err(Error::Geometry(format!("flow-map start point {p:?} outside the hold-all")));
        }
    }
    let layers = grid.layers();
    let zero = v.is_zero();
    let trajectories: Vec<Result<Vec<(Point, Mat2)>>> = points
        .par_iter()
        .map(|&x0| {
            let mut out = Vec::with_capacity(layers);
            let mut state = (x0, IDENTITY);
            out.push(state);
            for i in 0..grid.n_steps {
                if !zero {
                    state = advance(v, state, grid.time(i), grid.time(i + 1), dt_ode);
                    check_state(hold_all, &state, x0)?;
                }
                out.push(state);
            }
            Ok(out)
        })
        .collect();
    let mut positions = vec![Vec::with_capacity(points.len()); layers];
    let mut jacobians = vec![Vec::with_capacity(points.len()); layers];
    for traj in trajectories {
        for (l, (x, f)) in traj?.into_iter().enumerate() {
            positions[l].push(x);
            jacobians[l].push(f);
        }
    }
    Ok(FlowMap {
        grid,
        dt_ode,
        positions,
        jacobians,
    })
}

fn check_state(hold_all: &HoldAll, state: &(Point, Mat2), x0: Point) -> Result<()> {
    let (x, f) = state;
    if !(x.iter().chain(f.iter().flatten()).all(|c| c.is_finite())) {
        return Err(Error::NonFinite(format!("flow map from {x0:?}")));
    }
    if !hold_all.contains(*x) {
        return Err(Error::Geometry(format!(
            "trajectory from {x0:?} left the hold-all at {x:?}"
        )));
    }
    Ok(())
}

/// Integrates (x, ∇φ) from time `t0` to `t1` with RK4 substeps of length ≤ `dt_ode`.
pub fn advance(v: &VelocityFieldSpec, state: (Point, Mat2), t0: f64, t1: f64, dt_ode: f64) -> (Point, Mat2) {
    let span = t1 - t0;
    if span == 0.0 {
        return state;
    }
    let n = (span.abs() / dt_ode).ceil().max(1.0) as usize;
    let h = span / n as f64;
    let mut s = state;
    for k in 0..n {
        s = rk4_step(v, s, t0 + k as f64 * h, h);
    }
    s
}

fn rhs(v: &VelocityFieldSpec, t: f64, s: &(Point, Mat2)) -> (Point, Mat2) {
    let smp = v.sample(t, s.0);
    (smp.v, matmul(&smp.grad, &s.1))
}

fn axpy(s: &(Point, Mat2), h: f64, k: &(Point, Mat2)) -> (Point, Mat2) {
    let mut out = *s;
    for i in 0..2 {
        out.0[i] += h * k.0[i];
        for j in 0..2 {
            out.1[i][j] += h * k.1[i][j];
        }
    }
    out
}

fn rk4_step(v: &VelocityFieldSpec, s: (Point, Mat2), t: f64, h: f64) -> (Point, Mat2) {
    let k1 = rhs(v, t, &s);
    let k2 = rhs(v, t + 0.5 * h, &axpy(&s, 0.5 * h, &k1));
    let k3 = rhs(v, t + 0.5 * h, &axpy(&s, 0.5 * h, &k2));
    let k4 = rhs(v, t + h, &axpy(&s, h, &k3));
    let mut out = s;
    for i in 0..2 {
        out.0[i] += h / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]);
        for j in 0..2 {
            out.1[i][j] += h / 6.0 * (k1.1[i][j] + 2.0 * k2.1[i][j] + 2.0 * k3.1[i][j] + k4.1[i][j]);
        }
    }
    out
}

pub fn matmul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn matvec(a: &Mat2, x: [f64; 2]) -> [f64; 2] {
    [a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]]
}

pub fn det(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn inverse(a: &Mat2) -> Mat2 {
    let d = det(a);
    [[a[1][1] / d, -a[0][1] / d], [-a[1][0] / d, a[0][0] / d]]
}

/// Ratio of singular values of a 2×2 matrix.
pub fn condition_number(a: &Mat2) -> f64 {
    let fro2: f64 = a.iter().flatten().map(|x| x * x).sum();
    let d = det(a).abs();
    if d == 0.0 {
        return f64::INFINITY;
    }
    // σ₁² + σ₂² = fro², σ₁σ₂ = |det|
    let disc = (fro2 * fro2 - 4.0 * d * d).max(0.0).sqrt();
    let s1 = (0.5 * (fro2 + disc)).sqrt();
    let s2 = d / s1;
    s1 / s2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::velocity::{Profile, StreamBump, VelocityParams};

    fn hold_all() -> HoldAll {
        HoldAll::new([-3.0, -3.0], [3.0, 3.0], std::f64::consts::FRAC_PI_2).unwrap()
    }

    #[test]
    fn zero_field_is_identity() {
        let h = hold_all();
        let v = VelocityFieldSpec::zero(&h, 1.0);
        let grid = TimeGrid::new(h.horizon, h.horizon / 4.0).unwrap();
        let fm = integrate_flow_map(&v, &h, &[[0.3, 0.1], [-1.0, 2.0]], grid, 1e-3).unwrap();
        for l in 0..grid.layers() {
            assert_eq!(fm.positions[l], vec![[0.3, 0.1], [-1.0, 2.0]]);
            assert_eq!(fm.jacobians[l][0], IDENTITY);
        }
    }

    #[test]
    fn rotation_quarter_turn() {
        let h = hold_all();
        let v = VelocityFieldSpec::certify(
            VelocityParams {
                bumps: vec![StreamBump {
                    center: [0.0, 0.0],
                    radius: 2.0,
                    profile: Profile::Vortex { core: 0.5 },
                    time_coeffs: vec![1.0],
                }],
                c_v: 1000.0,
                margin: 0.05,
            },
            &h,
        )
        .unwrap();
        let grid = TimeGrid::new(h.horizon, h.horizon).unwrap();
        let fm = integrate_flow_map(&v, &h, &[[1.0, 0.0]], grid, 1e-3).unwrap();
        let x = fm.positions[1][0];
        assert!(x[0].abs() < 1e-8 && (x[1] - 1.0).abs() < 1e-8, "{x:?}");
        let f = fm.jacobians[1][0];
        assert!((f[0][1] + 1.0).abs() < 1e-8 && (f[1][0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn grid_rejects_non_dividing_step() {
        assert!(TimeGrid::new(1.0, 0.3).is_err());
        let g = TimeGrid::new(1.0, 0.25).unwrap();
        assert_eq!(g.layers(), 5);
        assert_eq!(g.index_of(0.5), Some(2));
        assert_eq!(g.index_of(0.6), None);
    }

    #[test]
    fn condition_number_of_rotation_and_shear() {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        assert!((condition_number(&[[c, -c], [c, c]]) - 1.0).abs() < 1e-12);
        assert!((condition_number(&[[2.0, 0.0], [0.0, 0.5]]) - 4.0).abs() < 1e-12);
    }
}

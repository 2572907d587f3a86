//! Projection of a zero-trace test field on a moving mesh onto compactly
//! supported, discretely solenoidal test fields.
//!
//! The pipeline, for cutoff index n:
//!
//! 1. pull every layer back to the reference mesh with the Piola map,
//! 2. reflect evenly in time to (−T, T) and multiply by the cutoff
//!    ξ_n(t, X) = s((T − |t| − b/n) n/(a − b)) · s((d(X) − b/n) n/(a − b)),
//!    where d is the distance to the reference boundary and s a C² step,
//! 3. mollify with the separable kernel (1 − τ²)³ (1 − ρ²)³ whose support
//!    fits in the space-time ball of radius c/n,
//! 4. push forward with the inverse Piola map,
//! 5. on every layer, remove the divergence on the support by a
//!    zero-trace Bogovskii correction on the submesh carrying the field.

use super::bogovskii::h1_norm;
use crate::discretization::assembly::{divergence_moments, p1_mass, solve_divergence_lift};
use crate::discretization::{
    discrete_divergence_norm, piola_apply, LayerGeometry, MovingMesh, P2Layout, PiolaDirection, PointLocator,
};
use crate::error::{Error, Result};
use crate::linalg::SparseLu;
use crate::Point;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Nodal P2 values on every layer of a moving mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestField {
    pub layers: Vec<Vec<[f64; 2]>>,
}

impl TestField {
    pub fn new(mm: &MovingMesh, layers: Vec<Vec<[f64; 2]>>) -> Result<Self> {
        if layers.len() != mm.layers() || layers.iter().any(|l| l.len() != mm.n_nodes()) {
            return Err(Error::InvalidInput(format!(
                "test field needs {} layers of {} nodes",
                mm.layers(),
                mm.n_nodes()
            )));
        }
        if layers.iter().flatten().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("test field coefficients".into()));
        }
        Ok(Self { layers })
    }

    /// Samples f(t, x) at the nodes of every layer.
    pub fn sample(mm: &MovingMesh, f: impl Fn(f64, Point) -> [f64; 2]) -> Result<Self> {
        let layers = (0..mm.layers())
            .map(|l| {
                let t = mm.grid.time(l);
                mm.layer_nodes(l).into_iter().map(|x| f(t, x)).collect()
            })
            .collect();
        Self::new(mm, layers)
    }

    /// Field given on the reference mesh, pushed forward by the inverse Piola map.
    pub fn from_reference(mm: &MovingMesh, f: impl Fn(f64, Point) -> [f64; 2]) -> Result<Self> {
        let nodes = mm.layout.node_positions(&mm.reference.vertices);
        let layers = (0..mm.layers())
            .map(|l| {
                let t = mm.grid.time(l);
                let r: Vec<[f64; 2]> = nodes.iter().map(|&x| f(t, x)).collect();
                piola_apply(mm, PiolaDirection::Inverse, &r, l)
            })
            .collect::<Result<_>>()?;
        Self::new(mm, layers)
    }

    /// Largest |u| over boundary nodes of all layers.
    pub fn max_trace(&self, mm: &MovingMesh) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| {
                l.iter()
                    .zip(&mm.layout.boundary_node)
                    .filter(|(_, &b)| b)
                    .map(|(v, _)| v[0].hypot(v[1]))
            })
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.layers.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// ‖self − other‖_{W^{1,2}} on every layer.
    pub fn w12_distance(&self, mm: &MovingMesh, other: &TestField) -> Vec<f64> {
        (0..mm.layers())
            .map(|l| {
                let nodes = mm.layer_nodes(l);
                let geom = LayerGeometry::new(&mm.layout, &nodes);
                let d: Vec<[f64; 2]> = self.layers[l]
                    .iter()
                    .zip(&other.layers[l])
                    .map(|(a, b)| [a[0] - b[0], a[1] - b[1]])
                    .collect();
                h1_norm(&geom, &d)
            })
            .collect()
    }

    pub fn w12_norms(&self, mm: &MovingMesh) -> Vec<f64> {
        (0..mm.layers())
            .map(|l| {
                let nodes = mm.layer_nodes(l);
                h1_norm(&LayerGeometry::new(&mm.layout, &nodes), &self.layers[l])
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectorConfig {
    pub n: usize,
    /// Cutoff reaches one at distance a/n.
    pub a: f64,
    /// Cutoff vanishes within distance b/n.
    pub b: f64,
    /// Mollifier radius factor; defaults to (b − 1)/2.
    pub c: Option<f64>,
    pub radial_points: usize,
    pub angular_points: usize,
}

impl Default for ProjectorConfig {
    fn default() -> Self {
        Self {
            n: 4,
            a: 3.0,
            b: 2.0,
            c: None,
            radial_points: 5,
            angular_points: 12,
        }
    }
}

impl ProjectorConfig {
    pub fn with_n(n: usize) -> Self {
        Self { n, ..Self::default() }
    }

    pub fn c(&self) -> f64 {
        self.c.unwrap_or(0.5 * (self.b - 1.0))
    }

    pub fn collar(&self) -> f64 {
        self.b / self.n as f64
    }

    pub fn mollifier_radius(&self) -> f64 {
        self.c() / self.n as f64
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.c();
        if self.n == 0 {
            return Err(Error::InvalidInput("cutoff index n must be at least 1".into()));
        }
        if !(self.b > 1.0 && self.a > self.b && c > 0.0 && c < self.b - 1.0) {
            return Err(Error::InvalidInput(format!(
                "projector needs a > b > 1 and 0 < c < b − 1 (got a {}, b {}, c {c})",
                self.a, self.b
            )));
        }
        if self.radial_points == 0 || self.angular_points < 3 {
            return Err(Error::InvalidInput("mollifier rule needs radial ≥ 1 and angular ≥ 3 points".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectorReport {
    pub n: usize,
    pub collar: f64,
    pub mollifier_radius: f64,
    /// Largest discrete divergence norm over layers.
    pub max_divergence: f64,
    /// Smallest reference boundary distance of a node with nonzero output.
    pub support_distance: f64,
    /// Reference mesh size h; the support sits within b/n − c/n − 2h of the boundary at worst.
    pub mesh_size: f64,
    /// Largest W^{1,2} norm of the Bogovskii correction.
    pub correction_norm: f64,
    /// Largest L² norm of the backward difference quotient in time.
    pub time_derivative_norm: f64,
}

impl ProjectorReport {
    /// Distance from the boundary inside which the output must vanish.
    pub fn support_bound(&self) -> f64 {
        self.collar - self.mollifier_radius - 2.0 * self.mesh_size
    }

    pub fn support_ok(&self) -> bool {
        self.support_distance >= self.support_bound()
    }
}

/// C² step: 0 for s ≤ 0, 1 for s ≥ 1.
fn smooth_step(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

fn kernel(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - r * r).powi(3)
    }
}

/// Gauss–Legendre nodes and weights on [0, 1].
fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    (0..m)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=m {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let pm = if m == 1 { x } else { p1 };
                let pm1 = if m == 1 { 1.0 } else { p0 };
                dp = m as f64 * (x * pm - pm1) / (x * x - 1.0);
                let dx = pm / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            (0.5 * (1.0 - x), 0.5 * w)
        })
        .collect()
}

/// Offsets and weights of the normalized polar rule for (1 − ρ²)³ on the unit disk.
fn disk_rule(radial: usize, angular: usize) -> Vec<(Point, f64)> {
    let mut out = Vec::with_capacity(radial * angular);
    for (s, w) in gauss_legendre(radial) {
        for j in 0..angular {
            let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / angular as f64;
            out.push(([s * th.cos(), s * th.sin()], w * s * kernel(s)));
        }
    }
    let total: f64 = out.iter().map(|(_, w)| w).sum();
    for (_, w) in &mut out {
        *w /= total;
    }
    out
}

fn segment_distance(x: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let s = if len2 > 0.0 {
        (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (x[0] - a[0] - s * d[0]).hypot(x[1] - a[1] - s * d[1])
}

/// Distance of every reference P2 node to the reference boundary.
pub fn reference_boundary_distance(mm: &MovingMesh) -> Vec<f64> {
    let v = &mm.reference.vertices;
    let nodes = mm.layout.node_positions(v);
    nodes
        .par_iter()
        .map(|&x| {
            mm.reference
                .boundary_edges
                .iter()
                .map(|&[a, b]| segment_distance(x, v[a], v[b]))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Zero-trace Bogovskii correction of the divergence of `u` on the triangles
/// where `u` does not vanish identically. Returns the correction.
fn local_correction(layout: &P2Layout, nodes: &[Point], mm: &MovingMesh, l: usize, u: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
    let mesh = mm.layer_mesh(l);
    let nz = |n: usize| u[n] != [0.0; 2];
    let active: Vec<bool> = layout.tri_nodes.iter().map(|t| t.iter().any(|&n| nz(n))).collect();
    let mut out = vec![[0.0; 2]; nodes.len()];
    // components linked through shared vertices
    let nv = mesh.n_vertices();
    let mut parent: Vec<usize> = (0..nv).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if active[t] {
            for k in 1..3 {
                let (a, b) = (find(&mut parent, tri[0]), find(&mut parent, tri[k]));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut roots: Vec<usize> = Vec::new();
    let mut comp_of = vec![usize::MAX; mesh.n_triangles()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if active[t] {
            let r = find(&mut parent, tri[0]);
            let k = roots.iter().position(|&x| x == r).unwrap_or_else(|| {
                roots.push(r);
                roots.len() - 1
            });
            comp_of[t] = k;
        }
    }
    let full_edge: HashMap<(usize, usize), usize> = layout
        .edges
        .iter()
        .enumerate()
        .map(|(e, &[a, b])| ((a, b), layout.n_vertices + e))
        .collect();
    for k in 0..roots.len() {
        let keep: Vec<bool> = comp_of.iter().map(|&c| c == k).collect();
        let (sub, old_of) = mesh.submesh(&keep);
        let sl = P2Layout::new(&sub);
        let map: Vec<usize> = (0..sl.n_nodes())
            .map(|i| {
                if i < sl.n_vertices {
                    old_of[i]
                } else {
                    let [a, b] = sl.edges[i - sl.n_vertices];
                    let (a, b) = (old_of[a], old_of[b]);
                    full_edge[&(a.min(b), a.max(b))]
                }
            })
            .collect();
        let sn: Vec<Point> = map.iter().map(|&i| nodes[i]).collect();
        let su: Vec<[f64; 2]> = map.iter().map(|&i| u[i]).collect();
        let geom = LayerGeometry::new(&sl, &sn);
        let r = divergence_moments(&geom, &su);
        let m = p1_mass(&geom);
        let proj = SparseLu::new().factorize(&m)?.solve_refined(&m, &r, 2);
        let target: Vec<f64> = proj.iter().map(|v| -v).collect();
        let (c, _) = solve_divergence_lift(&geom, &target, &mut SparseLu::new())?;
        for (i, &g) in map.iter().enumerate() {
            if !sl.boundary_node[i] {
                out[g] = c[i];
            }
        }
    }
    Ok(out)
}

/// Runs the cutoff–mollify–correct pipeline on `eta`.
pub fn project_solenoidal_testfield(
    mm: &MovingMesh,
    eta: &TestField,
    cfg: &ProjectorConfig,
) -> Result<(TestField, ProjectorReport)> {
    cfg.validate()?;
    if eta.layers.len() != mm.layers() || eta.layers.iter().any(|l| l.len() != mm.n_nodes()) {
        return Err(Error::InvalidInput("test field does not match the moving mesh".into()));
    }
    let scale = eta.max_abs();
    if eta.max_trace(mm) > 1e-12 * scale.max(1e-300) {
        return Err(Error::InvalidInput(format!(
            "test field has nonzero trace ({:e})",
            eta.max_trace(mm)
        )));
    }
    let h = mm.reference.max_edge();
    let n = cfg.n as f64;
    let collar = cfg.collar();
    if collar < 2.0 * h {
        return Err(Error::InvalidInput(format!(
            "cutoff index n = {} too large: collar b/n = {collar:.4} is thinner than two elements (h = {h:.4})",
            cfg.n
        )));
    }
    let layers = mm.layers();
    let horizon = mm.grid.horizon();
    let dist = reference_boundary_distance(mm);
    let ramp = (cfg.a - cfg.b) / n;

    // pull back and cut off
    let cut: Vec<Vec<[f64; 2]>> = (0..layers)
        .map(|l| -> Result<Vec<[f64; 2]>> {
            let t = mm.grid.time(l);
            let theta = smooth_step((horizon - t - collar) / ramp);
            let pulled = piola_apply(mm, PiolaDirection::Forward, &eta.layers[l], l)?;
            Ok(pulled
                .iter()
                .zip(&dist)
                .map(|(v, &d)| {
                    let xi = theta * smooth_step((d - collar) / ramp);
                    [xi * v[0], xi * v[1]]
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    // time mollification over the even reflection
    let rho = cfg.mollifier_radius() / std::f64::consts::SQRT_2;
    let reflected: Vec<(f64, usize)> = (1..layers)
        .rev()
        .map(|k| (-mm.grid.time(k), k))
        .chain((0..layers).map(|k| (mm.grid.time(k), k)))
        .collect();
    let timed: Vec<Vec<[f64; 2]>> = (0..layers)
        .map(|l| {
            let t = mm.grid.time(l);
            let w: Vec<(usize, f64)> = reflected
                .iter()
                .map(|&(s, k)| (k, kernel((t - s) / rho)))
                .filter(|(_, w)| *w > 0.0)
                .collect();
            let total: f64 = w.iter().map(|(_, w)| w).sum();
            (0..mm.n_nodes())
                .map(|i| {
                    let mut v = [0.0; 2];
                    for &(k, wk) in &w {
                        v[0] += wk * cut[k][i][0];
                        v[1] += wk * cut[k][i][1];
                    }
                    [v[0] / total, v[1] / total]
                })
                .collect()
        })
        .collect();

    // spatial mollification on the reference mesh
    let ref_nodes = mm.layout.node_positions(&mm.reference.vertices);
    let ref_geom = LayerGeometry::new(&mm.layout, &ref_nodes);
    let locator = PointLocator::new(&ref_geom);
    let rule = disk_rule(cfg.radial_points, cfg.angular_points);
    let mollified: Vec<Vec<[f64; 2]>> = timed
        .iter()
        .map(|g| {
            ref_nodes
                .par_iter()
                .zip(&dist)
                .map(|(&x, &d)| {
                    if d + rho <= collar - h {
                        return [0.0; 2];
                    }
                    let mut v = [0.0; 2];
                    for (o, w) in &rule {
                        let s = locator.eval(&ref_geom, g, [x[0] + rho * o[0], x[1] + rho * o[1]]);
                        v[0] += w * s[0];
                        v[1] += w * s[1];
                    }
                    v
                })
                .collect()
        })
        .collect();

    // push forward and correct the divergence
    let mut out = Vec::with_capacity(layers);
    let mut max_divergence: f64 = 0.0;
    let mut correction_norm: f64 = 0.0;
    for (l, m) in mollified.iter().enumerate() {
        let mut u = piola_apply(mm, PiolaDirection::Inverse, m, l)?;
        let nodes = mm.layer_nodes(l);
        let geom = LayerGeometry::new(&mm.layout, &nodes);
        if u.iter().any(|v| *v != [0.0; 2]) {
            let c = local_correction(&mm.layout, &nodes, mm, l, &u)?;
            correction_norm = correction_norm.max(h1_norm(&geom, &c));
            for (a, b) in u.iter_mut().zip(&c) {
                a[0] += b[0];
                a[1] += b[1];
            }
        }
        max_divergence = max_divergence.max(discrete_divergence_norm(&geom, &u)?);
        out.push(u);
    }
    let support_distance = out
        .iter()
        .flat_map(|l| l.iter().zip(&dist).filter(|(v, _)| **v != [0.0; 2]).map(|(_, &d)| d))
        .fold(f64::INFINITY, f64::min);
    let mut time_derivative_norm: f64 = 0.0;
    for l in 1..layers {
        let nodes = mm.layer_nodes(l);
        let geom = LayerGeometry::new(&mm.layout, &nodes);
        let dq: Vec<[f64; 2]> = out[l]
            .iter()
            .zip(&out[l - 1])
            .map(|(a, b)| [(a[0] - b[0]) / mm.grid.dt, (a[1] - b[1]) / mm.grid.dt])
            .collect();
        let rule = crate::discretization::TriangleRule::of_degree(4);
        let l2 = crate::discretization::integrate::layer_integral(&geom, &rule, 0.0, &dq, &|qp| {
            qp.u[0] * qp.u[0] + qp.u[1] * qp.u[1]
        });
        time_derivative_norm = time_derivative_norm.max(l2.max(0.0).sqrt());
    }
    let report = ProjectorReport {
        n: cfg.n,
        collar,
        mollifier_radius: cfg.mollifier_radius(),
        max_divergence,
        support_distance,
        mesh_size: h,
        correction_norm,
        time_derivative_norm,
    };
    Ok((TestField::new(mm, out)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let r = gauss_legendre(5);
        for k in 0..10 {
            let s: f64 = r.iter().map(|(x, w)| w * x.powi(k)).sum();
            assert!((s - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "k = {k}");
        }
    }

    #[test]
    fn disk_rule_is_normalized_and_symmetric() {
        let r = disk_rule(5, 12);
        let total: f64 = r.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-14);
        let m: [f64; 2] = [0, 1].map(|k| r.iter().map(|(o, w)| w * o[k]).sum());
        assert!(m[0].abs() < 1e-15 && m[1].abs() < 1e-15);
    }

    #[test]
    fn step_is_c2() {
        assert_eq!(smooth_step(-1.0), 0.0);
        assert_eq!(smooth_step(2.0), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
    }
}

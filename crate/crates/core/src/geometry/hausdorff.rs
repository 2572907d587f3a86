use super::domain::{DomainSpec, HoldAll};
use super::polygon::Polygon;
use super::velocity::VelocityFieldSpec;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HausdorffOptions {
    /// Grid points per side of the hold-all box.
    pub grid: usize,
    /// Boundary samples per domain.
    pub boundary_samples: usize,
}

impl Default for HausdorffOptions {
    fn default() -> Self {
        Self {
            grid: 257,
            boundary_samples: 1024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HausdorffReport {
    /// Hausdorff distance between D̄ \ A and D̄ \ B.
    pub complementary: f64,
    /// Hausdorff distance between ∂A and ∂B.
    pub boundary: f64,
    pub grid_spacing: f64,
}

/// Complementary Hausdorff distance of two certified domains in the same hold-all.
pub fn hausdorff_distance(
    a: &DomainSpec,
    b: &DomainSpec,
    hold_all: &HoldAll,
    opts: &HausdorffOptions,
) -> Result<HausdorffReport> {
    let pa = a.polygon(opts.boundary_samples);
    let pb = b.polygon(opts.boundary_samples);
    polygon_hausdorff(&pa, &pb, hold_all, opts.grid, a.r_min().min(b.r_min()))
}

/// Complementary Hausdorff distance within D̄ for two polygons.
///
/// Candidate points are the vertices of a uniform grid on D̄ plus the
/// boundary vertices of both polygons; distances to polygon boundaries are
/// exact. The result is accurate to the grid spacing.
pub fn polygon_hausdorff(
    a: &Polygon,
    b: &Polygon,
    hold_all: &HoldAll,
    grid: usize,
    r_min: f64,
) -> Result<HausdorffReport> {
    let n = grid.max(2);
    let hx = hold_all.width() / (n - 1) as f64;
    let hy = hold_all.height() / (n - 1) as f64;
    let spacing = hx.max(hy);
    if spacing > r_min {
        return Err(Error::InvalidInput(format!(
            "Hausdorff grid spacing {spacing} is coarser than r_min {r_min}"
        )));
    }
    let lo = hold_all.bbox[0];
    let grid_pts: Vec<[f64; 2]> = (0..n)
        .flat_map(|i| (0..n).map(move |j| [lo[0] + i as f64 * hx, lo[1] + j as f64 * hy]))
        .collect();
    let one_side = |p: &Polygon, q: &Polygon| -> f64 {
        // sup over x ∈ D̄ \ P of dist(x, D̄ \ Q) = dist(x, ∂Q) when x ∈ Q
        let mut best: f64 = 0.0;
        for &x in grid_pts.iter().filter(|x| !p.contains(**x)).chain(p.vertices.iter()) {
            if q.contains(x) {
                best = best.max(q.boundary_distance(x));
            }
        }
        best
    };
    let complementary = one_side(a, b).max(one_side(b, a));
    let directed = |p: &Polygon, q: &Polygon| {
        p.vertices
            .iter()
            .map(|&x| q.boundary_distance(x))
            .fold(0.0, f64::max)
    };
    let boundary = directed(a, b).max(directed(b, a));
    Ok(HausdorffReport {
        complementary,
        boundary,
        grid_spacing: spacing,
    })
}

/// Result of an inward offset.
#[derive(Debug, Clone, PartialEq)]
pub enum InteriorSet {
    Empty,
    Polygon(Polygon),
}

impl InteriorSet {
    pub fn area(&self) -> f64 {
        match self {
            InteriorSet::Empty => 0.0,
            InteriorSet::Polygon(p) => p.area(),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, InteriorSet::Empty)
    }
}

/// Polygonal approximation of {x ∈ Ω : dist(x, ∂Ω) > eps}.
///
/// Along each ray from the domain center the outermost point at distance
/// `eps` from the boundary polygon is located by bisection.
pub fn interior_set(spec: &DomainSpec, eps: f64, rays: usize) -> InteriorSet {
    let boundary = spec.polygon(rays.max(64) * 2);
    let c = spec.center();
    if !(eps > 0.0) || boundary.boundary_distance(c) <= eps {
        return InteriorSet::Empty;
    }
    let mut verts = Vec::with_capacity(rays);
    for k in 0..rays {
        let th = 2.0 * PI * k as f64 / rays as f64;
        let dir = [th.cos(), th.sin()];
        let at = |s: f64| [c[0] + s * dir[0], c[1] + s * dir[1]];
        let f = |s: f64| {
            let x = at(s);
            let d = boundary.boundary_distance(x);
            if boundary.contains(x) {
                d - eps
            } else {
                -d - eps
            }
        };
        let mut lo = 0.0;
        let mut hi = spec.radius(th) * 1.01;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        verts.push(at(lo));
    }
    InteriorSet::Polygon(Polygon::new(verts))
}

/// Sampled C¹ distance between two velocity fields:
/// max over a tensor grid of |ΔV| + |Δ∂ₜV| + |Δ∇V|.
pub fn field_distance_c1(
    a: &VelocityFieldSpec,
    b: &VelocityFieldSpec,
    hold_all: &HoldAll,
    grid: [usize; 3],
) -> Result<f64> {
    let [nx, ny, nt] = grid;
    let lo = hold_all.bbox[0];
    let mut best: f64 = 0.0;
    for it in 0..nt.max(1) {
        let t = if nt > 1 {
            hold_all.horizon * it as f64 / (nt - 1) as f64
        } else {
            0.0
        };
        for i in 0..nx {
            for j in 0..ny {
                let x = [
                    lo[0] + hold_all.width() * i as f64 / (nx - 1).max(1) as f64,
                    lo[1] + hold_all.height() * j as f64 / (ny - 1).max(1) as f64,
                ];
                let sa = a.sample(t, x);
                let sb = b.sample(t, x);
                let dv = (sa.v[0] - sb.v[0]).hypot(sa.v[1] - sb.v[1]);
                let dt = (sa.dt[0] - sb.dt[0]).hypot(sa.dt[1] - sb.dt[1]);
                let dg = sa
                    .grad
                    .iter()
                    .flatten()
                    .zip(sb.grad.iter().flatten())
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
                    .sqrt();
                let d = dv + dt + dg;
                if !d.is_finite() {
                    return Err(Error::NonFinite(format!("field distance at t={t}, x={x:?}")));
                }
                best = best.max(d);
            }
        }
    }
    Ok(best)
}

pub const DEFAULT_C1_GRID: [usize; 3] = [41, 41, 11];

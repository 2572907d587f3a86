use super::assembly::{eval_vector, LayerGeometry};
use super::element::p2_values;
use super::moving_mesh::MovingMesh;
use super::quadrature::TriangleRule;
use crate::Point;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Per-layer P2 velocity and P1 pressure coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub times: Vec<f64>,
    pub velocity: Vec<Vec<[f64; 2]>>,
    pub pressure: Vec<Vec<f64>>,
}

impl FlowState {
    pub fn zeros(times: Vec<f64>, n_nodes: usize, n_vertices: usize) -> Self {
        let l = times.len();
        Self {
            times,
            velocity: vec![vec![[0.0; 2]; n_nodes]; l],
            pressure: vec![vec![0.0; n_vertices]; l],
        }
    }

    pub fn layers(&self) -> usize {
        self.times.len()
    }
}

/// Field data available to an integrand at one quadrature point.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub t: f64,
    pub x: Point,
    pub u: [f64; 2],
    /// `grad[i][j]` = ∂_j u_i
    pub grad: [[f64; 2]; 2],
}

/// ∫_{Ω_l} integrand dx for a P2 field on one layer. Element sums are
/// reduced in element order.
pub fn layer_integral<F>(geom: &LayerGeometry, rule: &TriangleRule, t: f64, u: &[[f64; 2]], integrand: &F) -> f64
where
    F: Fn(&QuadPoint) -> f64 + Sync,
{
    let parts: Vec<f64> = (0..geom.n_triangles())
        .into_par_iter()
        .map(|tr| {
            let tri = geom.triangle(tr);
            let nodes = &geom.layout.tri_nodes[tr];
            let mut s = 0.0;
            for (l, &w) in rule.points.iter().zip(&rule.weights) {
                let phi = p2_values(*l);
                let dphi = tri.p2_gradients(*l);
                let (v, g) = eval_vector(nodes, u, &phi, &dphi);
                s += w * integrand(&QuadPoint {
                    t,
                    x: tri.point(*l),
                    u: v,
                    grad: g,
                });
            }
            s * tri.area
        })
        .collect();
    parts.iter().sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacetimeIntegral {
    pub total: f64,
    /// Spatial integral on each layer (before time weighting).
    pub per_layer: Vec<f64>,
}

/// Trapezoid weights of a uniform grid with `layers` points.
pub fn trapezoid_weights(dt: f64, layers: usize) -> Vec<f64> {
    (0..layers)
        .map(|i| if layers == 1 { 0.0 } else if i == 0 || i + 1 == layers { 0.5 * dt } else { dt })
        .collect()
}

/// Gaussian quadrature in space on every layer, trapezoid rule in time.
pub fn spacetime_integrate<F>(mm: &MovingMesh, state: &FlowState, rule: &TriangleRule, integrand: &F) -> SpacetimeIntegral
where
    F: Fn(&QuadPoint) -> f64 + Sync,
{
    let weights = trapezoid_weights(mm.grid.dt, mm.layers());
    let mut per_layer = Vec::with_capacity(mm.layers());
    let mut total = 0.0;
    for l in 0..mm.layers() {
        let nodes = mm.layer_nodes(l);
        let geom = LayerGeometry::new(&mm.layout, &nodes);
        let v = layer_integral(&geom, rule, state.times[l], &state.velocity[l], integrand);
        total += weights[l] * v;
        per_layer.push(v);
    }
    SpacetimeIntegral { total, per_layer }
}

use super::mesh::{P2Layout, TriMesh};
use crate::error::{Error, Result};
use crate::geometry::flow_map::IDENTITY;
use crate::geometry::{integrate_flow_map, FlowMap, HoldAll, TimeGrid, VelocityFieldSpec};
use crate::Point;

pub const DEFAULT_QUALITY_FLOOR: f64 = 0.1;

/// A reference triangulation transported by the flow map.
///
/// The flow map is integrated at every P2 node of the reference mesh. Layer
/// triangles take the transported vertices and stay straight, so layer
/// midpoints are vertex averages; the transported midpoints and all nodal
/// Jacobians are kept for Piola transforms.
#[derive(Debug, Clone)]
pub struct MovingMesh {
    pub reference: TriMesh,
    pub layout: P2Layout,
    pub grid: TimeGrid,
    pub node_flow: FlowMap,
    pub quality_floor: f64,
    pub min_quality: Vec<f64>,
}

impl MovingMesh {
    pub fn transport(
        reference: TriMesh,
        velocity: &VelocityFieldSpec,
        hold_all: &HoldAll,
        grid: TimeGrid,
        dt_ode: f64,
        quality_floor: f64,
    ) -> Result<Self> {
        let layout = P2Layout::new(&reference);
        let nodes = layout.node_positions(&reference.vertices);
        let node_flow = integrate_flow_map(velocity, hold_all, &nodes, grid, dt_ode)?;
        Self::from_flow(reference, layout, node_flow, quality_floor)
    }

    /// Mesh that does not move.
    pub fn fixed(reference: TriMesh, grid: TimeGrid) -> Result<Self> {
        let layout = P2Layout::new(&reference);
        let nodes = layout.node_positions(&reference.vertices);
        let node_flow = FlowMap {
            grid,
            dt_ode: grid.dt,
            positions: vec![nodes.clone(); grid.layers()],
            jacobians: vec![vec![IDENTITY; nodes.len()]; grid.layers()],
        };
        Self::from_flow(reference, layout, node_flow, 0.0)
    }

    fn from_flow(reference: TriMesh, layout: P2Layout, node_flow: FlowMap, quality_floor: f64) -> Result<Self> {
        let mut min_quality = Vec::with_capacity(node_flow.grid.layers());
        let mut mm = Self {
            reference,
            layout,
            grid: node_flow.grid,
            node_flow,
            quality_floor,
            min_quality: Vec::new(),
        };
        for l in 0..mm.grid.layers() {
            let layer = mm.layer_mesh(l);
            layer.check_orientation(l)?;
            let (tri, q) = layer.min_quality();
            if q < quality_floor {
                return Err(Error::MeshQuality {
                    layer: l,
                    triangle: tri,
                    quality: q,
                    floor: quality_floor,
                });
            }
            min_quality.push(q);
        }
        mm.min_quality = min_quality;
        Ok(mm)
    }

    pub fn layers(&self) -> usize {
        self.grid.layers()
    }

    pub fn n_nodes(&self) -> usize {
        self.layout.n_nodes()
    }

    pub fn layer_vertices(&self, l: usize) -> &[Point] {
        &self.node_flow.positions[l][..self.layout.n_vertices]
    }

    /// Triangulation of layer `l`.
    pub fn layer_mesh(&self, l: usize) -> TriMesh {
        TriMesh {
            vertices: self.layer_vertices(l).to_vec(),
            triangles: self.reference.triangles.clone(),
            boundary_edges: self.reference.boundary_edges.clone(),
        }
    }

    /// P2 node coordinates of layer `l` (straight-edge midpoints).
    pub fn layer_nodes(&self, l: usize) -> Vec<Point> {
        self.layout.node_positions(self.layer_vertices(l))
    }

    /// Nodal mesh velocity (x^l − x^{l−1}) / dt; zero at l = 0.
    pub fn mesh_velocity(&self, l: usize) -> Vec<[f64; 2]> {
        if l == 0 {
            return vec![[0.0; 2]; self.n_nodes()];
        }
        let a = self.layer_nodes(l - 1);
        let b = self.layer_nodes(l);
        let dt = self.grid.dt;
        a.iter()
            .zip(&b)
            .map(|(p, q)| [(q[0] - p[0]) / dt, (q[1] - p[1]) / dt])
            .collect()
    }

    pub fn layer_area(&self, l: usize) -> f64 {
        self.layer_mesh(l).area()
    }
}

/// Replaces vertex positions by φ(t, x) for a grid time `t`.
pub fn transport_mesh(mm: &MovingMesh, t: f64) -> Result<TriMesh> {
    let l = mm
        .grid
        .index_of(t)
        .ok_or_else(|| Error::InvalidInput(format!("t = {t} is not on the flow-map grid")))?;
    Ok(mm.layer_mesh(l))
}

use super::assembly::{eval_vector, LayerGeometry};
use super::element::{p2_values, AffineTriangle};
use crate::Point;

/// Uniform bucket grid over the triangles of one layer.
#[derive(Debug, Clone)]
pub struct PointLocator {
    lo: Point,
    cell: f64,
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
    triangles: Vec<AffineTriangle>,
}

impl PointLocator {
    pub fn new(geom: &LayerGeometry) -> Self {
        let triangles: Vec<AffineTriangle> = (0..geom.n_triangles()).map(|t| geom.triangle(t)).collect();
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut edge_sum = 0.0;
        for tri in &triangles {
            for v in &tri.vertices {
                for k in 0..2 {
                    lo[k] = lo[k].min(v[k]);
                    hi[k] = hi[k].max(v[k]);
                }
            }
            edge_sum += (2.0 * tri.area).sqrt();
        }
        let cell = (edge_sum / triangles.len().max(1) as f64).max(1e-12);
        let dims = [
            (((hi[0] - lo[0]) / cell).ceil() as usize).max(1),
            (((hi[1] - lo[1]) / cell).ceil() as usize).max(1),
        ];
        let mut buckets = vec![Vec::new(); dims[0] * dims[1]];
        for (t, tri) in triangles.iter().enumerate() {
            let (mut a, mut b) = ([usize::MAX; 2], [0usize; 2]);
            for v in &tri.vertices {
                for k in 0..2 {
                    let c = (((v[k] - lo[k]) / cell) as usize).min(dims[k] - 1);
                    a[k] = a[k].min(c);
                    b[k] = b[k].max(c);
                }
            }
            for i in a[0]..=b[0] {
                for j in a[1]..=b[1] {
                    buckets[i * dims[1] + j].push(t);
                }
            }
        }
        Self {
            lo,
            cell,
            dims,
            buckets,
            triangles,
        }
    }

    /// Triangle containing `x` and its barycentric coordinates.
    pub fn locate(&self, x: Point) -> Option<(usize, [f64; 3])> {
        let i = ((x[0] - self.lo[0]) / self.cell).floor();
        let j = ((x[1] - self.lo[1]) / self.cell).floor();
        if i < 0.0 || j < 0.0 || i >= self.dims[0] as f64 || j >= self.dims[1] as f64 {
            return None;
        }
        let b = &self.buckets[i as usize * self.dims[1] + j as usize];
        b.iter().find_map(|&t| {
            let l = self.triangles[t].barycentric(x);
            l.iter().all(|&c| c >= -1e-12).then_some((t, l))
        })
    }

    /// Value of a P2 vector field at `x`, zero outside the mesh.
    pub fn eval(&self, geom: &LayerGeometry, field: &[[f64; 2]], x: Point) -> [f64; 2] {
        match self.locate(x) {
            Some((t, l)) => {
                let phi = p2_values(l);
                let dphi = self.triangles[t].p2_gradients(l);
                eval_vector(&geom.layout.tri_nodes[t], field, &phi, &dphi).0
            }
            None => [0.0; 2],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::mesh::{P2Layout, TriMesh};

    #[test]
    fn reproduces_quadratics() {
        let mesh = TriMesh::star([0.0, 0.0], |_| 1.0, 6).unwrap();
        let layout = P2Layout::new(&mesh);
        let nodes = layout.node_positions(&mesh.vertices);
        let geom = LayerGeometry::new(&layout, &nodes);
        let f = |x: Point| [x[0] * x[1] - 0.3, x[1] * x[1] + 2.0 * x[0]];
        let u: Vec<[f64; 2]> = nodes.iter().map(|&x| f(x)).collect();
        let loc = PointLocator::new(&geom);
        for x in [[0.1, 0.2], [-0.5, 0.3], [0.0, -0.7]] {
            let v = loc.eval(&geom, &u, x);
            let e = f(x);
            assert!((v[0] - e[0]).abs() < 1e-12 && (v[1] - e[1]).abs() < 1e-12);
        }
        assert!(loc.locate([3.0, 0.0]).is_none());
    }
}

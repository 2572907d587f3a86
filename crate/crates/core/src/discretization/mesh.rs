use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::Point;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

/// Conforming triangulation with counter-clockwise triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    /// Boundary edges oriented so the domain lies to their left.
    pub boundary_edges: Vec<[usize; 2]>,
}

/// How fine a reference mesh is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshResolution {
    /// Target edge length; ring count is ⌈r_max / h⌉.
    Target(f64),
    /// Fixed number of rings.
    Rings(usize),
}

impl TriMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        signed_area(self.tri_coords(t))
    }

    pub fn tri_coords(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.signed_area(t)).sum()
    }

    pub fn max_edge(&self) -> f64 {
        let mut h: f64 = 0.0;
        for t in &self.triangles {
            for k in 0..3 {
                let a = self.vertices[t[k]];
                let b = self.vertices[t[(k + 1) % 3]];
                h = h.max((a[0] - b[0]).hypot(a[1] - b[1]));
            }
        }
        h
    }

    pub fn boundary_vertex_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n_vertices()];
        for e in &self.boundary_edges {
            m[e[0]] = true;
            m[e[1]] = true;
        }
        m
    }

    /// Polar ring mesh of a star-shaped region x = c + s r(θ) (cos θ, sin θ),
    /// s ∈ [0, 1]. Ring i carries 6i vertices; neighbouring rings are zipped
    /// by angle, giving 6N² triangles with connectivity independent of r.
    pub fn star(center: Point, radius: impl Fn(f64) -> f64, rings: usize) -> Result<Self> {
        if rings == 0 {
            return Err(Error::InvalidInput("ring mesh needs at least one ring".into()));
        }
        let mut vertices = vec![center];
        let mut ring_start = vec![0usize];
        for i in 1..=rings {
            ring_start.push(vertices.len());
            let s = i as f64 / rings as f64;
            let m = 6 * i;
            for k in 0..m {
                let th = 2.0 * PI * k as f64 / m as f64;
                let r = radius(th);
                if !(r > 0.0) || !r.is_finite() {
                    return Err(Error::Geometry(format!("degenerate radius {r} at angle {th}")));
                }
                vertices.push([center[0] + s * r * th.cos(), center[1] + s * r * th.sin()]);
            }
        }
        let mut triangles = Vec::with_capacity(6 * rings * rings);
        for k in 0..6 {
            triangles.push([0, 1 + k, 1 + (k + 1) % 6]);
        }
        for i in 2..=rings {
            let inner = |j: usize| ring_start[i - 1] + j % (6 * (i - 1));
            let outer = |k: usize| ring_start[i] + k % (6 * i);
            let (ni, no) = (6 * (i - 1), 6 * i);
            let (mut j, mut k) = (0usize, 0usize);
            while j < ni || k < no {
                // advance the ring whose next angle is smaller; ties go outer
                let adv_outer = if j == ni {
                    true
                } else if k == no {
                    false
                } else {
                    (k + 1) * ni <= (j + 1) * no
                };
                if adv_outer {
                    triangles.push([inner(j), outer(k), outer(k + 1)]);
                    k += 1;
                } else {
                    triangles.push([inner(j), outer(k), inner(j + 1)]);
                    j += 1;
                }
            }
        }
        let last = ring_start[rings];
        let nb = 6 * rings;
        let boundary_edges = (0..nb).map(|k| [last + k, last + (k + 1) % nb]).collect();
        let mesh = Self {
            vertices,
            triangles,
            boundary_edges,
        };
        mesh.check_orientation(0)?;
        Ok(mesh)
    }

    /// Structured mesh of [x0, x1] × [y0, y1] with nx × ny cells, each split
    /// along alternating diagonals.
    pub fn rectangle(lo: Point, hi: Point, nx: usize, ny: usize) -> Self {
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([
                    lo[0] + (hi[0] - lo[0]) * i as f64 / nx as f64,
                    lo[1] + (hi[1] - lo[1]) * j as f64 / ny as f64,
                ]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                if (i + j) % 2 == 0 {
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                } else {
                    triangles.push([a, b, d]);
                    triangles.push([b, c, d]);
                }
            }
        }
        let mut boundary_edges = Vec::new();
        for i in 0..nx {
            boundary_edges.push([id(i, 0), id(i + 1, 0)]);
        }
        for j in 0..ny {
            boundary_edges.push([id(nx, j), id(nx, j + 1)]);
        }
        for i in (0..nx).rev() {
            boundary_edges.push([id(i + 1, ny), id(i, ny)]);
        }
        for j in (0..ny).rev() {
            boundary_edges.push([id(0, j + 1), id(0, j)]);
        }
        Self {
            vertices,
            triangles,
            boundary_edges,
        }
    }

    /// Fails on the first triangle with non-positive signed area.
    pub fn check_orientation(&self, layer: usize) -> Result<()> {
        for t in 0..self.n_triangles() {
            let a = self.signed_area(t);
            if !(a > 0.0) {
                return Err(Error::Tangling {
                    layer,
                    triangle: t,
                    area: a,
                });
            }
        }
        Ok(())
    }

    /// Smallest normalized radius ratio 2 r_in / r_circ (1 for equilateral).
    pub fn min_quality(&self) -> (usize, f64) {
        (0..self.n_triangles())
            .map(|t| (t, radius_ratio(self.tri_coords(t))))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }

    /// Sub-mesh of the triangles selected by `keep`, with compacted vertex
    /// numbering. Returns the mesh and the map new vertex → old vertex.
    pub fn submesh(&self, keep: &[bool]) -> (TriMesh, Vec<usize>) {
        let mut new_id = vec![usize::MAX; self.n_vertices()];
        let mut old_of = Vec::new();
        let mut triangles = Vec::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if !keep[t] {
                continue;
            }
            let mut nt = [0; 3];
            for k in 0..3 {
                let v = tri[k];
                if new_id[v] == usize::MAX {
                    new_id[v] = old_of.len();
                    old_of.push(v);
                }
                nt[k] = new_id[v];
            }
            triangles.push(nt);
        }
        let vertices = old_of.iter().map(|&v| self.vertices[v]).collect();
        // boundary edges: edges used by exactly one kept triangle
        let mut count: HashMap<(usize, usize), (usize, [usize; 2])> = HashMap::new();
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let e = count.entry((a.min(b), a.max(b))).or_insert((0, [a, b]));
                e.0 += 1;
            }
        }
        let mut boundary_edges: Vec<[usize; 2]> =
            count.into_values().filter(|(c, _)| *c == 1).map(|(_, e)| e).collect();
        boundary_edges.sort_unstable();
        (
            TriMesh {
                vertices,
                triangles,
                boundary_edges,
            },
            old_of,
        )
    }
}

pub fn signed_area(v: [Point; 3]) -> f64 {
    0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]))
}

pub fn radius_ratio(v: [Point; 3]) -> f64 {
    let l = |a: Point, b: Point| (a[0] - b[0]).hypot(a[1] - b[1]);
    let (a, b, c) = (l(v[1], v[2]), l(v[2], v[0]), l(v[0], v[1]));
    let area = signed_area(v);
    if area <= 0.0 {
        return 0.0;
    }
    let s = 0.5 * (a + b + c);
    8.0 * area * area / (s * a * b * c)
}

/// Reference mesh of a certified star domain.
pub fn build_reference_mesh(spec: &DomainSpec, resolution: MeshResolution) -> Result<TriMesh> {
    let rings = match resolution {
        MeshResolution::Target(h) => {
            if !(h > 0.0 && h < spec.r_min() / 4.0) {
                return Err(Error::InvalidInput(format!(
                    "mesh size h = {h} must satisfy 0 < h < r_min/4 = {}",
                    spec.r_min() / 4.0
                )));
            }
            (spec.r_max() / h).ceil() as usize
        }
        MeshResolution::Rings(n) => n,
    };
    TriMesh::star(spec.center(), |th| spec.radius(th), rings)
}

/// Edge and node numbering of the continuous P2 space on a mesh.
///
/// Nodes are the mesh vertices followed by one midpoint per edge. Local node
/// order on a triangle is v0, v1, v2, m01, m12, m20.
#[derive(Debug, Clone, PartialEq)]
pub struct P2Layout {
    pub n_vertices: usize,
    pub edges: Vec<[usize; 2]>,
    pub tri_nodes: Vec<[usize; 6]>,
    pub boundary_node: Vec<bool>,
    /// (vertex a, vertex b, midpoint node) for each oriented boundary edge.
    pub boundary_edges: Vec<[usize; 3]>,
}

impl P2Layout {
    pub fn new(mesh: &TriMesh) -> Self {
        let nv = mesh.n_vertices();
        let mut edge_id: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut tri_nodes = Vec::with_capacity(mesh.n_triangles());
        for tri in &mesh.triangles {
            let mut nodes = [tri[0], tri[1], tri[2], 0, 0, 0];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let id = *edge_id.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edges.len() - 1
                });
                nodes[3 + k] = nv + id;
            }
            tri_nodes.push(nodes);
        }
        let mut boundary_node = vec![false; nv + edges.len()];
        let mut boundary_edges = Vec::with_capacity(mesh.boundary_edges.len());
        for &[a, b] in &mesh.boundary_edges {
            let m = nv + edge_id[&(a.min(b), a.max(b))];
            boundary_node[a] = true;
            boundary_node[b] = true;
            boundary_node[m] = true;
            boundary_edges.push([a, b, m]);
        }
        Self {
            n_vertices: nv,
            edges,
            tri_nodes,
            boundary_node,
            boundary_edges,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_vertices + self.edges.len()
    }

    /// P2 node coordinates for given vertex coordinates (straight edges).
    pub fn node_positions(&self, vertices: &[Point]) -> Vec<Point> {
        let mut out = vertices.to_vec();
        out.extend(self.edges.iter().map(|&[a, b]| {
            [
                0.5 * (vertices[a][0] + vertices[b][0]),
                0.5 * (vertices[a][1] + vertices[b][1]),
            ]
        }));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_mesh_counts_and_area() {
        for n in [1, 2, 5, 10] {
            let m = TriMesh::star([0.0, 0.0], |_| 1.0, n).unwrap();
            assert_eq!(m.n_triangles(), 6 * n * n);
            assert_eq!(m.n_vertices(), 3 * n * n + 3 * n + 1);
            assert_eq!(m.boundary_edges.len(), 6 * n);
            let exact = 0.5 * (6 * n) as f64 * (2.0 * PI / (6 * n) as f64).sin();
            assert!((m.area() - exact).abs() < 1e-12);
        }
        let m = TriMesh::star([0.0, 0.0], |_| 1.0, 10).unwrap();
        assert!((m.area() - PI).abs() < 0.01 * PI);
        let q = m.min_quality().1;
        assert!(q > 0.4, "{q}");
    }

    #[test]
    fn rectangle_mesh() {
        let m = TriMesh::rectangle([0.0, 0.0], [2.0, 1.0], 4, 3);
        assert_eq!(m.n_triangles(), 24);
        assert!((m.area() - 2.0).abs() < 1e-14);
        m.check_orientation(0).unwrap();
        let l = P2Layout::new(&m);
        assert_eq!(l.n_nodes(), 9 * 7);
        assert_eq!(l.boundary_node.iter().filter(|b| **b).count(), 2 * (8 + 6));
    }

    #[test]
    fn boundary_edges_are_counter_clockwise() {
        let m = TriMesh::star([0.3, 0.0], |th| 1.0 + 0.2 * th.cos(), 4).unwrap();
        let twice: f64 = m
            .boundary_edges
            .iter()
            .map(|&[a, b]| {
                let (p, q) = (m.vertices[a], m.vertices[b]);
                p[0] * q[1] - q[0] * p[1]
            })
            .sum();
        assert!((0.5 * twice - m.area()).abs() < 1e-12);
    }

    #[test]
    fn submesh_boundary() {
        let m = TriMesh::rectangle([0.0, 0.0], [1.0, 1.0], 4, 4);
        let keep: Vec<bool> = (0..m.n_triangles()).map(|t| t < 8).collect();
        let (s, map) = m.submesh(&keep);
        assert_eq!(s.n_triangles(), 8);
        assert!((s.area() - 0.25).abs() < 1e-14);
        assert_eq!(map.len(), s.n_vertices());
        let perim: f64 = s
            .boundary_edges
            .iter()
            .map(|&[a, b]| {
                let (p, q) = (s.vertices[a], s.vertices[b]);
                (p[0] - q[0]).hypot(p[1] - q[1])
            })
            .sum();
        assert!((perim - 2.5).abs() < 1e-12);
    }
}

//! Legacy-ASCII VTK and CSV writers. Floating-point values are written with
//! 17 significant digits so exported numerics round-trip bit-exactly.

use super::mesh::P2Layout;
use crate::error::Result;
use crate::Point;
use std::fmt::Write as _;
use std::path::Path;

/// VTK cell type of the six-node quadratic triangle.
const VTK_QUADRATIC_TRIANGLE: u8 = 22;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One mesh layer with nodal velocity, pressure and optional extra scalars.
pub struct VtkLayer<'a> {
    pub title: String,
    pub layout: &'a P2Layout,
    pub nodes: &'a [Point],
    pub velocity: &'a [[f64; 2]],
    /// P1 pressure at vertices.
    pub pressure: &'a [f64],
    pub scalars: Vec<(&'a str, Vec<f64>)>,
}

impl VtkLayer<'_> {
    pub fn render(&self) -> String {
        let n = self.nodes.len();
        let nt = self.layout.tri_nodes.len();
        let mut s = String::with_capacity(n * 120);
        s.push_str("# vtk DataFile Version 3.0\n");
        let _ = writeln!(s, "{}", self.title.replace('\n', " "));
        s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
        let _ = writeln!(s, "POINTS {n} double");
        for p in self.nodes {
            let _ = writeln!(s, "{} {} 0", fmt_f64(p[0]), fmt_f64(p[1]));
        }
        let _ = writeln!(s, "CELLS {nt} {}", nt * 7);
        for t in &self.layout.tri_nodes {
            let _ = writeln!(s, "6 {} {} {} {} {} {}", t[0], t[1], t[2], t[3], t[4], t[5]);
        }
        let _ = writeln!(s, "CELL_TYPES {nt}");
        for _ in 0..nt {
            let _ = writeln!(s, "{VTK_QUADRATIC_TRIANGLE}");
        }
        let _ = writeln!(s, "POINT_DATA {n}");
        s.push_str("VECTORS velocity double\n");
        for u in self.velocity {
            let _ = writeln!(s, "{} {} 0", fmt_f64(u[0]), fmt_f64(u[1]));
        }
        s.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
        for v in nodal_pressure(self.layout, self.pressure) {
            let _ = writeln!(s, "{}", fmt_f64(v));
        }
        for (name, vals) in &self.scalars {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in vals {
                let _ = writeln!(s, "{}", fmt_f64(*v));
            }
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

/// P1 pressure interpolated to all P2 nodes.
pub fn nodal_pressure(layout: &P2Layout, p: &[f64]) -> Vec<f64> {
    let mut out = p.to_vec();
    out.extend(layout.edges.iter().map(|&[a, b]| 0.5 * (p[a] + p[b])));
    out
}

/// CSV with columns t, vertex_index, x, y for a sequence of polygons.
pub fn boundary_csv(times: &[f64], layers: &[Vec<Point>]) -> String {
    let mut s = String::from("t,vertex_index,x,y\n");
    for (t, poly) in times.iter().zip(layers) {
        for (i, p) in poly.iter().enumerate() {
            let _ = writeln!(s, "{},{i},{},{}", fmt_f64(*t), fmt_f64(p[0]), fmt_f64(p[1]));
        }
    }
    s
}

/// CSV node table of one layer: node, x, y, u, v.
pub fn node_table_csv(nodes: &[Point], velocity: &[[f64; 2]]) -> String {
    let mut s = String::from("node,x,y,u,v\n");
    for (i, (p, u)) in nodes.iter().zip(velocity).enumerate() {
        let _ = writeln!(s, "{i},{},{},{},{}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(u[0]), fmt_f64(u[1]));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::mesh::TriMesh;

    #[test]
    fn vtk_layout() {
        let mesh = TriMesh::rectangle([0.0, 0.0], [1.0, 1.0], 1, 1);
        let layout = P2Layout::new(&mesh);
        let nodes = layout.node_positions(&mesh.vertices);
        let vel = vec![[0.1, 0.2]; nodes.len()];
        let p = vec![1.0; 4];
        let vtk = VtkLayer {
            title: "t".into(),
            layout: &layout,
            nodes: &nodes,
            velocity: &vel,
            pressure: &p,
            scalars: vec![("h", vec![0.0; nodes.len()])],
        }
        .render();
        assert!(vtk.contains("POINTS 9 double"));
        assert!(vtk.contains("CELLS 2 14"));
        assert!(vtk.contains("SCALARS h double 1"));
        assert_eq!(vtk.lines().filter(|l| *l == "22").count(), 2);
    }

    #[test]
    fn seventeen_digits_round_trip() {
        let x = 0.1 + 0.2;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }
}

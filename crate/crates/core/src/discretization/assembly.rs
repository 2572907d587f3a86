//! Element-by-element assembly of P2–P1 mixed systems.
//!
//! Velocity dof `2 n + c` is component `c` at P2 node `n`; pressure dof
//! `2 N + v` is the P1 value at vertex `v`. Element contributions are
//! computed in parallel and merged in element order, so the assembled
//! matrices do not depend on the thread count.
//!
//! The saddle-point block structure is
//!
//! ```text
//! [ A   Bᵀ ] [u]   [F]        A = m M + k L + N(a) + K_ν
//! [ B   0  ] [p] = [G]        B_{q,u} = −(q, div u)
//! ```

use super::element::{p2_values, AffineTriangle};
use super::mesh::P2Layout;
use super::quadrature::TriangleRule;
use crate::error::{Error, Result};
use crate::linalg::{CscMatrix, SparseLu, TripletMatrix};
use crate::rheology::RheologyParams;
use crate::Point;
use rayon::prelude::*;

/// Geometry of one mesh layer: the P2 layout plus node coordinates.
#[derive(Debug, Clone, Copy)]
pub struct LayerGeometry<'a> {
    pub layout: &'a P2Layout,
    pub nodes: &'a [Point],
}

impl<'a> LayerGeometry<'a> {
    pub fn new(layout: &'a P2Layout, nodes: &'a [Point]) -> Self {
        Self { layout, nodes }
    }

    pub fn n_triangles(&self) -> usize {
        self.layout.tri_nodes.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.layout.n_nodes()
    }

    pub fn n_vertices(&self) -> usize {
        self.layout.n_vertices
    }

    pub fn triangle(&self, t: usize) -> AffineTriangle {
        let n = &self.layout.tri_nodes[t];
        AffineTriangle::new([self.nodes[n[0]], self.nodes[n[1]], self.nodes[n[2]]])
    }

    pub fn n_velocity_dofs(&self) -> usize {
        2 * self.n_nodes()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes() + self.n_vertices()
    }

    pub fn pressure_dof(&self, v: usize) -> usize {
        2 * self.n_nodes() + v
    }
}

/// Value and gradient (`grad[i][j]` = ∂_j u_i) of a P2 vector field at a
/// barycentric point of a triangle.
#[inline]
pub fn eval_vector(
    nodes: &[usize; 6],
    field: &[[f64; 2]],
    phi: &[f64; 6],
    dphi: &[[f64; 2]; 6],
) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut v = [0.0; 2];
    let mut g = [[0.0; 2]; 2];
    for a in 0..6 {
        let u = field[nodes[a]];
        for i in 0..2 {
            v[i] += phi[a] * u[i];
            for j in 0..2 {
                g[i][j] += dphi[a][j] * u[i];
            }
        }
    }
    (v, g)
}

/// Symmetric part of a 2×2 gradient.
#[inline]
pub fn sym(g: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let off = 0.5 * (g[0][1] + g[1][0]);
    [[g[0][0], off], [off, g[1][1]]]
}

#[inline]
pub fn frob(a: &[[f64; 2]; 2]) -> f64 {
    (a[0][0] * a[0][0] + a[0][1] * a[0][1] + a[1][0] * a[1][0] + a[1][1] * a[1][1]).sqrt()
}

/// Picard-frozen power-law viscosity ν(|D u_guess|).
#[derive(Clone, Copy)]
pub struct Viscous<'a> {
    pub guess: &'a [[f64; 2]],
    pub rheology: &'a RheologyParams,
    pub inv_m: f64,
}

pub type BodyForce<'a> = &'a (dyn Fn(Point) -> [f64; 2] + Sync);

/// Coefficients of the bilinear and linear forms assembled on one layer.
#[derive(Clone, Copy, Default)]
pub struct FormCoeffs<'a> {
    /// Coefficient of (u, v).
    pub mass: f64,
    /// Coefficient of (∇u, ∇v).
    pub laplace: f64,
    /// ν(D guess) (Du, Dv).
    pub viscous: Option<Viscous<'a>>,
    /// ((a·∇)u, v) with a nodal P2 advecting field.
    pub advect: Option<&'a [[f64; 2]]>,
    /// Include the pressure blocks.
    pub pressure: bool,
    /// Adds mass·(u_prev, v) to the right-hand side.
    pub rhs_previous: Option<&'a [[f64; 2]]>,
    /// Adds (f, v) to the right-hand side.
    pub force: Option<BodyForce<'a>>,
    /// Adds −(f, q) to the continuity right-hand side for a P1 field f.
    pub div_target: Option<&'a [f64]>,
}

/// Dense element matrix over 12 velocity and 3 pressure dofs.
#[derive(Debug, Clone)]
pub struct ElementSystem {
    pub dofs: [usize; 15],
    pub matrix: [[f64; 15]; 15],
    pub rhs: [f64; 15],
}

pub fn assemble_elements(geom: &LayerGeometry, rule: &TriangleRule, c: &FormCoeffs) -> Vec<ElementSystem> {
    let nn = geom.n_nodes();
    (0..geom.n_triangles())
        .into_par_iter()
        .map(|t| element_system(geom, rule, c, t, nn))
        .collect()
}

fn element_system(geom: &LayerGeometry, rule: &TriangleRule, c: &FormCoeffs, t: usize, nn: usize) -> ElementSystem {
    let nodes = &geom.layout.tri_nodes[t];
    let tri = geom.triangle(t);
    let mut dofs = [0usize; 15];
    for a in 0..6 {
        dofs[2 * a] = 2 * nodes[a];
        dofs[2 * a + 1] = 2 * nodes[a] + 1;
    }
    for i in 0..3 {
        dofs[12 + i] = 2 * nn + nodes[i];
    }
    let mut m = [[0.0; 15]; 15];
    let mut rhs = [0.0; 15];
    for (l, &w0) in rule.points.iter().zip(&rule.weights) {
        let w = w0 * tri.area;
        let phi = p2_values(*l);
        let dphi = tri.p2_gradients(*l);
        let x = tri.point(*l);

        let mut nu = 0.0;
        if let Some(v) = &c.viscous {
            let (_, g) = eval_vector(nodes, v.guess, &phi, &dphi);
            nu = v.rheology.viscosity(frob(&sym(&g)), v.inv_m);
        }
        let adv = c.advect.map(|a| eval_vector(nodes, a, &phi, &dphi).0);
        let adv_dot: [f64; 6] = match adv {
            Some(av) => std::array::from_fn(|b| av[0] * dphi[b][0] + av[1] * dphi[b][1]),
            None => [0.0; 6],
        };

        for a in 0..6 {
            for b in 0..6 {
                let gg = dphi[a][0] * dphi[b][0] + dphi[a][1] * dphi[b][1];
                let diag = c.mass * phi[a] * phi[b] + c.laplace * gg + phi[a] * adv_dot[b] + 0.5 * nu * gg;
                for d in 0..2 {
                    for cc in 0..2 {
                        let mut v = 0.5 * nu * dphi[b][d] * dphi[a][cc];
                        if cc == d {
                            v += diag;
                        }
                        m[2 * a + d][2 * b + cc] += w * v;
                    }
                }
            }
        }
        if c.pressure {
            let psi = *l;
            for i in 0..3 {
                for a in 0..6 {
                    for d in 0..2 {
                        let v = -w * psi[i] * dphi[a][d];
                        m[2 * a + d][12 + i] += v;
                        m[12 + i][2 * a + d] += v;
                    }
                }
            }
            if let Some(f) = c.div_target {
                let fx = psi[0] * f[nodes[0]] + psi[1] * f[nodes[1]] + psi[2] * f[nodes[2]];
                for i in 0..3 {
                    rhs[12 + i] -= w * psi[i] * fx;
                }
            }
        }
        let mut load = [0.0; 2];
        if let Some(f) = c.force {
            let fx = f(x);
            load[0] += fx[0];
            load[1] += fx[1];
        }
        if let Some(prev) = c.rhs_previous {
            let (u, _) = eval_vector(nodes, prev, &phi, &dphi);
            load[0] += c.mass * u[0];
            load[1] += c.mass * u[1];
        }
        if load != [0.0; 2] {
            for a in 0..6 {
                rhs[2 * a] += w * phi[a] * load[0];
                rhs[2 * a + 1] += w * phi[a] * load[1];
            }
        }
    }
    ElementSystem { dofs, matrix: m, rhs }
}

/// Dirichlet constraints: `values[dof]` is `Some(g)` for fixed dofs.
#[derive(Debug, Clone)]
pub struct Constraints {
    pub values: Vec<Option<f64>>,
}

impl Constraints {
    pub fn none(n: usize) -> Self {
        Self { values: vec![None; n] }
    }

    /// Fixes both velocity components on every boundary node.
    pub fn boundary_velocity(geom: &LayerGeometry, boundary_values: &[[f64; 2]]) -> Self {
        let mut values = vec![None; geom.n_dofs()];
        for (n, &b) in geom.layout.boundary_node.iter().enumerate() {
            if b {
                values[2 * n] = Some(boundary_values[n][0]);
                values[2 * n + 1] = Some(boundary_values[n][1]);
            }
        }
        Self { values }
    }

    pub fn pin(&mut self, dof: usize, value: f64) {
        self.values[dof] = Some(value);
    }
}

/// Global matrix with constrained rows and columns replaced by identity
/// and the eliminated columns moved to the right-hand side.
pub fn build_constrained(n: usize, elements: &[ElementSystem], cons: &Constraints) -> (CscMatrix, Vec<f64>) {
    let mut trip = TripletMatrix::with_capacity(n, n, elements.len() * 225 + n);
    let mut rhs = vec![0.0; n];
    for e in elements {
        for (r, &gi) in e.dofs.iter().enumerate() {
            if cons.values[gi].is_some() {
                continue;
            }
            rhs[gi] += e.rhs[r];
            for (k, &gj) in e.dofs.iter().enumerate() {
                let v = e.matrix[r][k];
                match cons.values[gj] {
                    Some(g) => rhs[gi] -= v * g,
                    None => trip.push(gi, gj, v),
                }
            }
        }
    }
    for (i, c) in cons.values.iter().enumerate() {
        if let Some(g) = c {
            trip.push(i, i, 1.0);
            rhs[i] = *g;
        }
    }
    (trip.to_csc(), rhs)
}

/// Global matrix and right-hand side without any constraints.
pub fn build_unconstrained(n: usize, elements: &[ElementSystem]) -> (CscMatrix, Vec<f64>) {
    let mut trip = TripletMatrix::with_capacity(n, n, elements.len() * 225);
    let mut rhs = vec![0.0; n];
    for e in elements {
        for (r, &gi) in e.dofs.iter().enumerate() {
            rhs[gi] += e.rhs[r];
            for (k, &gj) in e.dofs.iter().enumerate() {
                trip.push(gi, gj, e.matrix[r][k]);
            }
        }
    }
    (trip.to_csc(), rhs)
}

/// Splits a saddle-point solution into nodal velocities and vertex pressures.
pub fn split_solution(geom: &LayerGeometry, x: &[f64]) -> (Vec<[f64; 2]>, Vec<f64>) {
    let nn = geom.n_nodes();
    let u = (0..nn).map(|n| [x[2 * n], x[2 * n + 1]]).collect();
    let p = x[2 * nn..].to_vec();
    (u, p)
}

pub fn flatten(u: &[[f64; 2]]) -> Vec<f64> {
    u.iter().flat_map(|v| [v[0], v[1]]).collect()
}

/// Consistent P1 mass matrix.
pub fn p1_mass(geom: &LayerGeometry) -> CscMatrix {
    let nv = geom.n_vertices();
    let mut trip = TripletMatrix::with_capacity(nv, nv, 9 * geom.n_triangles());
    for t in 0..geom.n_triangles() {
        let tri = geom.triangle(t);
        let nodes = &geom.layout.tri_nodes[t];
        for i in 0..3 {
            for j in 0..3 {
                let v = if i == j { tri.area / 6.0 } else { tri.area / 12.0 };
                trip.push(nodes[i], nodes[j], v);
            }
        }
    }
    trip.to_csc()
}

/// r_q = ∫ q div u for every P1 basis function q (degree-2 exact).
pub fn divergence_moments(geom: &LayerGeometry, u: &[[f64; 2]]) -> Vec<f64> {
    let rule = TriangleRule::of_degree(2);
    let mut r = vec![0.0; geom.n_vertices()];
    for t in 0..geom.n_triangles() {
        let tri = geom.triangle(t);
        let nodes = &geom.layout.tri_nodes[t];
        for (l, &w0) in rule.points.iter().zip(&rule.weights) {
            let phi = p2_values(*l);
            let dphi = tri.p2_gradients(*l);
            let (_, g) = eval_vector(nodes, u, &phi, &dphi);
            let div = g[0][0] + g[1][1];
            for i in 0..3 {
                r[nodes[i]] += w0 * tri.area * l[i] * div;
            }
        }
    }
    r
}

/// L² norm of the P1 projection of div u, √(rᵀ M_p⁻¹ r).
pub fn discrete_divergence_norm(geom: &LayerGeometry, u: &[[f64; 2]]) -> Result<f64> {
    let r = divergence_moments(geom, u);
    let m = p1_mass(geom);
    let y = SparseLu::new().factorize(&m)?.solve_refined(&m, &r, 1);
    Ok(crate::linalg::dot(&r, &y).max(0.0).sqrt())
}

/// Solves for the zero-trace field c of minimal Dirichlet energy with
/// P1-projected divergence equal to `target` (P1 nodal values):
/// (∇c, ∇v) − (λ, div v) = 0,  −(q, div c) = −(target, q).
/// One multiplier dof is pinned; `target` must have zero mean.
pub fn solve_divergence_lift(geom: &LayerGeometry, target: &[f64], lu: &mut SparseLu) -> Result<(Vec<[f64; 2]>, Vec<f64>)> {
    let rule = TriangleRule::of_degree(2);
    let coeffs = FormCoeffs {
        laplace: 1.0,
        pressure: true,
        div_target: Some(target),
        ..Default::default()
    };
    let elems = assemble_elements(geom, &rule, &coeffs);
    let zero = vec![[0.0; 2]; geom.n_nodes()];
    let mut cons = Constraints::boundary_velocity(geom, &zero);
    cons.pin(geom.pressure_dof(0), 0.0);
    let (a, b) = build_constrained(geom.n_dofs(), &elems, &cons);
    let f = lu.factorize(&a)?;
    let x = f.solve_refined(&a, &b, 2);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("divergence lift".into()));
    }
    Ok(split_solution(geom, &x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::mesh::TriMesh;

    #[test]
    fn constrained_system_keeps_identity_rows() {
        let mesh = TriMesh::rectangle([0.0, 0.0], [1.0, 1.0], 2, 2);
        let layout = P2Layout::new(&mesh);
        let nodes = layout.node_positions(&mesh.vertices);
        let geom = LayerGeometry::new(&layout, &nodes);
        let rule = TriangleRule::of_degree(4);
        let c = FormCoeffs {
            mass: 1.0,
            laplace: 1.0,
            pressure: true,
            ..Default::default()
        };
        let elems = assemble_elements(&geom, &rule, &c);
        let g: Vec<[f64; 2]> = nodes.iter().map(|x| [x[0], -x[1]]).collect();
        let mut cons = Constraints::boundary_velocity(&geom, &g);
        cons.pin(geom.pressure_dof(0), 0.0);
        let (a, b) = build_constrained(geom.n_dofs(), &elems, &cons);
        for (i, cv) in cons.values.iter().enumerate() {
            if let Some(v) = cv {
                assert_eq!(a.get(i, i), 1.0);
                assert_eq!(b[i], *v);
            }
        }
        let (full, _) = build_unconstrained(geom.n_dofs(), &elems);
        let dense = full.to_dense();
        assert!((&dense - dense.transpose()).amax() < 1e-14);
    }

    #[test]
    fn divergence_of_linear_field() {
        let mesh = TriMesh::rectangle([0.0, 0.0], [1.0, 2.0], 3, 3);
        let layout = P2Layout::new(&mesh);
        let nodes = layout.node_positions(&mesh.vertices);
        let geom = LayerGeometry::new(&layout, &nodes);
        let u: Vec<[f64; 2]> = nodes.iter().map(|x| [3.0 * x[0], 0.0]).collect();
        let n = discrete_divergence_norm(&geom, &u).unwrap();
        assert!((n - 3.0 * 2f64.sqrt()).abs() < 1e-12);
        let rot: Vec<[f64; 2]> = nodes.iter().map(|x| [-x[1], x[0]]).collect();
        assert!(discrete_divergence_norm(&geom, &rot).unwrap() < 1e-13);
    }
}

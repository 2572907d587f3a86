//! Korn and Poincaré constants of a mesh over zero-trace P2 fields.

use crate::discretization::assembly::{
    assemble_elements, build_unconstrained, FormCoeffs, Viscous,
};
use crate::discretization::integrate::layer_integral;
use crate::discretization::{LayerGeometry, TriangleRule};
use crate::error::{Error, Result};
use crate::linalg::{dot, CscMatrix, SparseLu};
use crate::rheology::RheologyParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KornKind {
    /// Largest generalized eigenvalue, exact up to the iteration tolerance.
    Eigenvalue,
    /// Maximum ratio over sampled fields: an ESTIMATE from below.
    SampledLowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KornEstimate {
    pub p: f64,
    pub value: f64,
    pub kind: KornKind,
    pub iterations: usize,
}

const MAX_ITER: usize = 2000;
const ITER_TOL: f64 = 1e-13;

/// Free (interior) velocity dofs.
pub fn interior_dofs(geom: &LayerGeometry) -> Vec<usize> {
    (0..geom.n_nodes())
        .filter(|&n| !geom.layout.boundary_node[n])
        .flat_map(|n| [2 * n, 2 * n + 1])
        .collect()
}

fn form(geom: &LayerGeometry, coeffs: FormCoeffs, idx: &[usize]) -> CscMatrix {
    let rule = TriangleRule::of_degree(4);
    let elems = assemble_elements(geom, &rule, &coeffs);
    build_unconstrained(geom.n_dofs(), &elems).0.principal(idx)
}

/// Stiffness matrices (∇u, ∇v), (Du, Dv) and mass (u, v) on interior dofs.
fn zero_trace_forms(geom: &LayerGeometry) -> (Vec<usize>, CscMatrix, CscMatrix, CscMatrix) {
    let idx = interior_dofs(geom);
    let newtonian = RheologyParams::newtonian();
    let zero = vec![[0.0; 2]; geom.n_nodes()];
    let grad = form(
        geom,
        FormCoeffs {
            laplace: 1.0,
            ..Default::default()
        },
        &idx,
    );
    let sym = form(
        geom,
        FormCoeffs {
            viscous: Some(Viscous {
                guess: &zero,
                rheology: &newtonian,
                inv_m: 0.0,
            }),
            ..Default::default()
        },
        &idx,
    );
    let mass = form(
        geom,
        FormCoeffs {
            mass: 1.0,
            ..Default::default()
        },
        &idx,
    );
    (idx, grad, sym, mass)
}

fn expand(geom: &LayerGeometry, idx: &[usize], x: &[f64]) -> Vec<[f64; 2]> {
    let mut u = vec![[0.0; 2]; geom.n_nodes()];
    for (&d, &v) in idx.iter().zip(x) {
        u[d / 2][d % 2] = v;
    }
    u
}

/// Largest λ with A x = λ B x by power iteration on B⁻¹A; returns λ and x.
fn top_eigenpair(a: &CscMatrix, b: &CscMatrix, seed: u64) -> Result<(f64, Vec<f64>, usize)> {
    let n = a.nrows;
    if n == 0 {
        return Err(Error::Verification("no interior degrees of freedom".into()));
    }
    let lu = SparseLu::new().factorize(b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut lambda = 0.0;
    for k in 1..=MAX_ITER {
        let y = lu.solve(&a.mul_vec(&x));
        let norm = dot(&y, &b.mul_vec(&y)).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Verification(format!("eigen-iteration broke down at step {k}")));
        }
        x = y.iter().map(|v| v / norm).collect();
        let next = dot(&x, &a.mul_vec(&x));
        if (next - lambda).abs() <= ITER_TOL * next.abs() {
            return Ok((next, x, k));
        }
        lambda = next;
    }
    Ok((lambda, x, MAX_ITER))
}

fn lp_ratio(geom: &LayerGeometry, u: &[[f64; 2]], p: f64) -> Result<f64> {
    let rule = TriangleRule::of_degree(4);
    let grad = layer_integral(geom, &rule, 0.0, u, &|qp| {
        qp.grad.iter().flatten().map(|g| g * g).sum::<f64>().sqrt().powf(p)
    });
    let sym = layer_integral(geom, &rule, 0.0, u, &|qp| {
        let g = &qp.grad;
        let off = 0.5 * (g[0][1] + g[1][0]);
        (g[0][0] * g[0][0] + 2.0 * off * off + g[1][1] * g[1][1]).sqrt().powf(p)
    });
    if !(sym > 0.0) {
        return Err(Error::Verification("sampled field has vanishing symmetric gradient".into()));
    }
    Ok((grad / sym).powf(1.0 / p))
}

/// Korn constant ‖∇v‖_p ≤ c ‖Dv‖_p over zero-trace P2 fields.
///
/// For p = 2 this is the square root of the top generalized eigenvalue. For
/// other p the returned value is a sampled lower bound over `samples` seeded
/// random fields and the p = 2 eigenfield.
pub fn korn_constant(geom: &LayerGeometry, p: f64, samples: usize, seed: u64) -> Result<KornEstimate> {
    if !(p >= 2.0) {
        return Err(Error::InvalidInput(format!("Korn exponent must be at least 2, got {p}")));
    }
    let (idx, grad, sym, _) = zero_trace_forms(geom);
    let (lambda, x, iterations) = top_eigenpair(&grad, &sym, seed)?;
    if p == 2.0 {
        return Ok(KornEstimate {
            p,
            value: lambda.sqrt(),
            kind: KornKind::Eigenvalue,
            iterations,
        });
    }
    let mut best = lp_ratio(geom, &expand(geom, &idx, &x), p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    for _ in 0..samples {
        let y: Vec<f64> = (0..idx.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        best = best.max(lp_ratio(geom, &expand(geom, &idx, &y), p)?);
    }
    Ok(KornEstimate {
        p,
        value: best,
        kind: KornKind::SampledLowerBound,
        iterations,
    })
}

type GradKernel = dyn Fn(&[[f64; 2]; 2]) -> f64 + Sync;

/// (‖∇v‖² − 2‖Dv‖² + ‖div v‖²) / ‖∇v‖², zero for zero-trace fields.
pub fn korn_identity_residual(geom: &LayerGeometry, u: &[[f64; 2]]) -> f64 {
    let rule = TriangleRule::of_degree(4);
    let mut parts = [0.0; 3];
    let kernels: [&GradKernel; 3] = [
        &|g| g.iter().flatten().map(|v| v * v).sum(),
        &|g| {
            let off = 0.5 * (g[0][1] + g[1][0]);
            g[0][0] * g[0][0] + 2.0 * off * off + g[1][1] * g[1][1]
        },
        &|g| (g[0][0] + g[1][1]).powi(2),
    ];
    for (k, f) in kernels.iter().enumerate() {
        parts[k] = layer_integral(geom, &rule, 0.0, u, &|qp| f(&qp.grad));
    }
    (parts[0] - 2.0 * parts[1] + parts[2]) / parts[0]
}

/// Random zero-trace field for identity checks.
pub fn random_zero_trace(geom: &LayerGeometry, seed: u64) -> Vec<[f64; 2]> {
    let idx = interior_dofs(geom);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..idx.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    expand(geom, &idx, &x)
}

/// Poincaré constant ‖v‖ ≤ c ‖∇v‖ over zero-trace fields, 1/√λ_min.
pub fn poincare_constant(geom: &LayerGeometry, seed: u64) -> Result<f64> {
    let (_, grad, _, mass) = zero_trace_forms(geom);
    // inverse iteration: top eigenvalue of grad⁻¹ mass is 1/λ_min
    let (mu, _, _) = top_eigenpair(&mass, &grad, seed)?;
    Ok(mu.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{P2Layout, TriMesh};
    use std::f64::consts::PI;

    fn geom_of(mesh: &TriMesh) -> (P2Layout, Vec<[f64; 2]>) {
        let layout = P2Layout::new(mesh);
        let nodes = layout.node_positions(&mesh.vertices);
        (layout, nodes)
    }

    #[test]
    fn korn_is_root_two_on_the_square() {
        let mesh = TriMesh::rectangle([0.0, 0.0], [1.0, 1.0], 6, 6);
        let (l, n) = geom_of(&mesh);
        let g = LayerGeometry::new(&l, &n);
        let k = korn_constant(&g, 2.0, 0, 1).unwrap();
        assert!(k.value <= 2f64.sqrt() + 1e-6 && k.value >= 2f64.sqrt() - 0.05, "{}", k.value);
    }

    #[test]
    fn identity_holds_for_random_fields() {
        let mesh = TriMesh::star([0.0, 0.0], |t| 1.0 + 0.2 * (3.0 * t).cos(), 5).unwrap();
        let (l, n) = geom_of(&mesh);
        let g = LayerGeometry::new(&l, &n);
        for s in 0..5 {
            assert!(korn_identity_residual(&g, &random_zero_trace(&g, s)).abs() < 1e-12);
        }
    }

    #[test]
    fn poincare_on_the_square() {
        let mesh = TriMesh::rectangle([0.0, 0.0], [1.0, 1.0], 8, 8);
        let (l, n) = geom_of(&mesh);
        let g = LayerGeometry::new(&l, &n);
        let c = poincare_constant(&g, 3).unwrap();
        let exact = 1.0 / (PI * 2f64.sqrt());
        assert!((c - exact).abs() < 1e-3 * exact, "{c} vs {exact}");
    }

    #[test]
    fn sampled_estimate_dominates_the_eigenfield() {
        let mesh = TriMesh::rectangle([0.0, 0.0], [1.0, 1.0], 4, 4);
        let (l, n) = geom_of(&mesh);
        let g = LayerGeometry::new(&l, &n);
        let k4 = korn_constant(&g, 4.0, 5, 2).unwrap();
        assert_eq!(k4.kind, KornKind::SampledLowerBound);
        let (idx, grad, sym, _) = zero_trace_forms(&g);
        let (_, x, _) = top_eigenpair(&grad, &sym, 2).unwrap();
        assert!(k4.value >= lp_ratio(&g, &expand(&g, &idx, &x), 4.0).unwrap());
    }
}

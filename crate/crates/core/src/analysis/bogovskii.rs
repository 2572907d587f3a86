use crate::discretization::assembly::{divergence_moments, p1_mass, solve_divergence_lift};
use crate::discretization::integrate::layer_integral;
use crate::discretization::{LayerGeometry, TriangleRule};
use crate::error::{Error, Result};
use crate::linalg::{dot, SparseLu};
use serde::{Deserialize, Serialize};

/// Relative tolerance on |∫f| / ‖f‖ for the compatibility check.
pub const COMPATIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BogovskiiResult {
    /// Nodal P2 field with zero trace.
    pub field: Vec<[f64; 2]>,
    pub f_norm: f64,
    /// ‖B‖_{W^{1,2}}.
    pub field_norm: f64,
    /// ‖B‖_{W^{1,2}} / ‖f‖_{L²}, zero for f = 0.
    pub constant: f64,
    /// ‖Π div B − f‖_{L²}, Π the L² projection onto P1.
    pub divergence_defect: f64,
}

/// √(fᵀ M f) and ∫f for a P1 field.
pub fn p1_norm_and_mean(geom: &LayerGeometry, f: &[f64]) -> (f64, f64) {
    let m = p1_mass(geom);
    let mf = m.mul_vec(f);
    (dot(f, &mf).max(0.0).sqrt(), mf.iter().sum())
}

/// L² norm of Π div u − f.
pub fn divergence_defect(geom: &LayerGeometry, u: &[[f64; 2]], f: &[f64]) -> Result<f64> {
    let m = p1_mass(geom);
    let r = divergence_moments(geom, u);
    let proj = SparseLu::new().factorize(&m)?.solve_refined(&m, &r, 2);
    let e: Vec<f64> = proj.iter().zip(f).map(|(a, b)| a - b).collect();
    Ok(dot(&e, &m.mul_vec(&e)).max(0.0).sqrt())
}

pub fn h1_norm(geom: &LayerGeometry, u: &[[f64; 2]]) -> f64 {
    let rule = TriangleRule::of_degree(4);
    layer_integral(geom, &rule, 0.0, u, &|qp| {
        qp.u[0] * qp.u[0] + qp.u[1] * qp.u[1] + qp.grad.iter().flatten().map(|g| g * g).sum::<f64>()
    })
    .max(0.0)
    .sqrt()
}

/// Discrete right inverse of the divergence with zero boundary values.
///
/// `f` holds P1 vertex values and must have zero mean. The result is the
/// zero-trace field of least Dirichlet energy whose P1-projected divergence
/// equals `f`.
pub fn bogovskii(geom: &LayerGeometry, f: &[f64]) -> Result<BogovskiiResult> {
    if f.len() != geom.n_vertices() {
        return Err(Error::InvalidInput(format!(
            "scalar field has {} values, mesh has {} vertices",
            f.len(),
            geom.n_vertices()
        )));
    }
    let (f_norm, mean) = p1_norm_and_mean(geom, f);
    if mean.abs() > COMPATIBILITY_TOL * f_norm {
        return Err(Error::Compatibility {
            mean: mean.abs(),
            tolerance: COMPATIBILITY_TOL * f_norm,
        });
    }
    if f_norm == 0.0 {
        return Ok(BogovskiiResult {
            field: vec![[0.0; 2]; geom.n_nodes()],
            f_norm,
            field_norm: 0.0,
            constant: 0.0,
            divergence_defect: 0.0,
        });
    }
    let (field, _) = solve_divergence_lift(geom, f, &mut SparseLu::new())?;
    let field_norm = h1_norm(geom, &field);
    let divergence_defect = divergence_defect(geom, &field, f)?;
    Ok(BogovskiiResult {
        constant: field_norm / f_norm,
        field,
        f_norm,
        field_norm,
        divergence_defect,
    })
}

/// Subtracts the area-weighted mean so the field is compatible.
pub fn remove_mean(geom: &LayerGeometry, f: &mut [f64]) {
    let ones = vec![1.0; f.len()];
    let (_, mean) = p1_norm_and_mean(geom, f);
    let (_, area) = p1_norm_and_mean(geom, &ones);
    for v in f.iter_mut() {
        *v -= mean / area;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{P2Layout, TriMesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square(n: usize) -> (P2Layout, Vec<[f64; 2]>) {
        let mesh = TriMesh::rectangle([0.0, 0.0], [1.0, 1.0], n, n);
        let layout = P2Layout::new(&mesh);
        let nodes = layout.node_positions(&mesh.vertices);
        (layout, nodes)
    }

    #[test]
    fn zero_data_gives_zero_field() {
        let (layout, nodes) = square(4);
        let geom = LayerGeometry::new(&layout, &nodes);
        let r = bogovskii(&geom, &vec![0.0; geom.n_vertices()]).unwrap();
        assert!(r.field.iter().all(|v| *v == [0.0; 2]));
    }

    #[test]
    fn rejects_nonzero_mean() {
        let (layout, nodes) = square(4);
        let geom = LayerGeometry::new(&layout, &nodes);
        let err = bogovskii(&geom, &vec![1.0; geom.n_vertices()]).unwrap_err();
        assert!(matches!(err, Error::Compatibility { .. }));
    }

    #[test]
    fn linear_in_the_data() {
        let (layout, nodes) = square(6);
        let geom = LayerGeometry::new(&layout, &nodes);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut draw = || {
            let mut f: Vec<f64> = (0..geom.n_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            remove_mean(&geom, &mut f);
            f
        };
        let (f, g) = (draw(), draw());
        let (a, b) = (0.7, -1.9);
        let fg: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
        let bf = bogovskii(&geom, &f).unwrap().field;
        let bg = bogovskii(&geom, &g).unwrap().field;
        let bfg = bogovskii(&geom, &fg).unwrap().field;
        let scale = bfg.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for ((x, y), z) in bf.iter().zip(&bg).zip(&bfg) {
            for k in 0..2 {
                assert!((a * x[k] + b * y[k] - z[k]).abs() <= 1e-10 * scale);
            }
        }
    }
}

#![allow(clippy::needless_range_loop)]

use hemoshape::analysis::verify::swirl_fixture;
use hemoshape::discretization::assembly::{assemble_elements, build_unconstrained, eval_vector, FormCoeffs, Viscous};
use hemoshape::discretization::element::{p2_values, AffineTriangle};
use hemoshape::discretization::{piola_apply, LayerGeometry, MovingMesh, P2Layout, PiolaDirection, TriMesh, TriangleRule};
use hemoshape::geometry::{HoldAll, Profile, StreamBump, TimeGrid, VelocityFieldSpec, VelocityParams};
use hemoshape::rheology::RheologyParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn wobbly_disk(rings: usize) -> TriMesh {
    TriMesh::star([0.1, -0.05], |t| 1.0 + 0.15 * (2.0 * t).cos() - 0.05 * (3.0 * t).sin(), rings).unwrap()
}

fn random_field(n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    (0..n).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect()
}

/// ∇φ_a = Σ_k λ_k G_a[k] for the six P2 basis functions.
fn gradient_coefficients(grad_lambda: &[[f64; 2]; 3]) -> [[[f64; 2]; 3]; 6] {
    let mut g = [[[0.0; 2]; 3]; 6];
    for i in 0..3 {
        for k in 0..3 {
            let c = if k == i { 3.0 } else { -1.0 };
            g[i][k] = [c * grad_lambda[i][0], c * grad_lambda[i][1]];
        }
    }
    for e in 0..3 {
        let (i, j) = (e, (e + 1) % 3);
        g[3 + e][i] = [4.0 * grad_lambda[j][0], 4.0 * grad_lambda[j][1]];
        g[3 + e][j] = [4.0 * grad_lambda[i][0], 4.0 * grad_lambda[i][1]];
    }
    g
}

/// ∫_T λ_k λ_m = |T| (1 + δ_km) / 12.
fn lambda_mass(area: f64, k: usize, m: usize) -> f64 {
    area * if k == m { 2.0 } else { 1.0 } / 12.0
}

#[test]
fn newtonian_viscous_matrix_matches_closed_form_integrals() {
    let mesh = wobbly_disk(3);
    let layout = P2Layout::new(&mesh);
    let nodes = layout.node_positions(&mesh.vertices);
    let geom = LayerGeometry::new(&layout, &nodes);
    let newtonian = RheologyParams::newtonian();
    let guess = vec![[0.0; 2]; nodes.len()];
    let coeffs = FormCoeffs {
        viscous: Some(Viscous {
            guess: &guess,
            rheology: &newtonian,
            inv_m: 0.0,
        }),
        ..Default::default()
    };
    let elems = assemble_elements(&geom, &TriangleRule::of_degree(2), &coeffs);
    let (assembled, _) = build_unconstrained(geom.n_dofs(), &elems);

    let n = 2 * nodes.len();
    let mut oracle = vec![vec![0.0; n]; n];
    for (t, tri) in layout.tri_nodes.iter().enumerate() {
        let at = AffineTriangle::new(mesh.tri_coords(t));
        let g = gradient_coefficients(&at.grad_lambda);
        // (Du, Dv) = ½ Σ_{d,c} ∂_c u_d ∂_c v_d + ½ Σ_{d,c} ∂_c u_d ∂_d v_c
        for a in 0..6 {
            for b in 0..6 {
                for d in 0..2 {
                    for c in 0..2 {
                        let mut v = 0.0;
                        for k in 0..3 {
                            for m in 0..3 {
                                let w = lambda_mass(at.area, k, m);
                                if d == c {
                                    v += 0.5 * w * (g[a][k][0] * g[b][m][0] + g[a][k][1] * g[b][m][1]);
                                }
                                v += 0.5 * w * g[a][k][c] * g[b][m][d];
                            }
                        }
                        oracle[2 * tri[a] + d][2 * tri[b] + c] += v;
                    }
                }
            }
        }
    }
    let scale = oracle.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        for j in 0..n {
            let diff = (assembled.get(i, j) - oracle[i][j]).abs();
            assert!(diff <= 1e-12 * scale, "entry ({i}, {j}): {} vs {}", assembled.get(i, j), oracle[i][j]);
        }
    }
}

#[test]
fn frozen_viscous_form_is_bilinear_and_matches_quadrature() {
    let mesh = wobbly_disk(3);
    let layout = P2Layout::new(&mesh);
    let nodes = layout.node_positions(&mesh.vertices);
    let geom = LayerGeometry::new(&layout, &nodes);
    let rheology = RheologyParams::new(1.5, 5.0, vec![]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let guess = random_field(nodes.len(), &mut rng);
    let rule = TriangleRule::of_degree(4);
    let coeffs = FormCoeffs {
        viscous: Some(Viscous {
            guess: &guess,
            rheology: &rheology,
            inv_m: 0.0,
        }),
        ..Default::default()
    };
    let (a, _) = build_unconstrained(geom.n_dofs(), &assemble_elements(&geom, &rule, &coeffs));
    let form = |u: &[[f64; 2]], v: &[[f64; 2]]| {
        let mut uf: Vec<f64> = u.iter().flatten().copied().collect();
        uf.resize(geom.n_dofs(), 0.0);
        let vf = v.iter().flatten();
        a.mul_vec(&uf).iter().zip(vf).map(|(x, y)| x * y).sum::<f64>()
    };
    // second route: integrate ν(D guess) Du:Dv directly
    let direct = |u: &[[f64; 2]], v: &[[f64; 2]]| {
        let mut total = 0.0;
        for (t, tri) in layout.tri_nodes.iter().enumerate() {
            let at = AffineTriangle::new(mesh.tri_coords(t));
            for (l, w) in rule.points.iter().zip(&rule.weights) {
                let phi = p2_values(*l);
                let dphi = at.p2_gradients(*l);
                let (_, gg) = eval_vector(tri, &guess, &phi, &dphi);
                let (_, gu) = eval_vector(tri, u, &phi, &dphi);
                let (_, gv) = eval_vector(tri, v, &phi, &dphi);
                let sym = |g: [[f64; 2]; 2]| [[g[0][0], 0.5 * (g[0][1] + g[1][0])], [0.5 * (g[0][1] + g[1][0]), g[1][1]]];
                let (dg, du, dv) = (sym(gg), sym(gu), sym(gv));
                let norm = (dg[0][0].powi(2) + 2.0 * dg[0][1].powi(2) + dg[1][1].powi(2)).sqrt();
                let nu = rheology.viscosity(norm, 0.0);
                let dd = du[0][0] * dv[0][0] + 2.0 * du[0][1] * dv[0][1] + du[1][1] * dv[1][1];
                total += w * at.area * nu * dd;
            }
        }
        total
    };
    for _ in 0..10 {
        let (u, w, v) = (
            random_field(nodes.len(), &mut rng),
            random_field(nodes.len(), &mut rng),
            random_field(nodes.len(), &mut rng),
        );
        let (al, be) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let comb: Vec<[f64; 2]> = u.iter().zip(&w).map(|(x, y)| [al * x[0] + be * y[0], al * x[1] + be * y[1]]).collect();
        let lhs = form(&comb, &v);
        let rhs = al * form(&u, &v) + be * form(&w, &v);
        assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
        let (x, y) = (form(&u, &v), direct(&u, &v));
        assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()), "{x} vs {y}");
        assert!((form(&u, &v) - form(&v, &u)).abs() <= 1e-10 * (1.0 + x.abs()));
    }
}

#[test]
fn piola_is_the_identity_on_a_fixed_mesh() {
    let mesh = wobbly_disk(3);
    let mm = MovingMesh::fixed(mesh, TimeGrid::new(0.3, 0.1).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let eta = random_field(mm.n_nodes(), &mut rng);
    for l in 0..mm.layers() {
        for dir in [PiolaDirection::Forward, PiolaDirection::Inverse] {
            assert_eq!(piola_apply(&mm, dir, &eta, l).unwrap(), eta);
        }
    }
}

#[test]
fn piola_of_a_rigid_rotation_rotates_vectors() {
    let horizon = std::f64::consts::FRAC_PI_2;
    let hold = HoldAll::new([-2.0, -2.0], [2.0, 2.0], horizon).unwrap();
    let velocity = VelocityFieldSpec::certify(
        VelocityParams {
            bumps: vec![StreamBump {
                center: [0.0, 0.0],
                radius: 1.9,
                profile: Profile::Vortex { core: 0.8 },
                time_coeffs: vec![1.0],
            }],
            c_v: 1e6,
            margin: 0.05,
        },
        &hold,
    )
    .unwrap();
    let mesh = TriMesh::star([0.0, 0.0], |_| 1.0, 4).unwrap();
    let grid = TimeGrid::new(horizon, horizon / 4.0).unwrap();
    let mm = MovingMesh::transport(mesh, &velocity, &hold, grid, horizon / 400.0, 0.05).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let eta = random_field(mm.n_nodes(), &mut rng);
    for l in 0..mm.layers() {
        let (s, c) = mm.grid.time(l).sin_cos();
        let pushed = piola_apply(&mm, PiolaDirection::Inverse, &eta, l).unwrap();
        for (p, e) in pushed.iter().zip(&eta) {
            let expect = [c * e[0] - s * e[1], s * e[0] + c * e[1]];
            assert!((p[0] - expect[0]).abs() < 1e-8 && (p[1] - expect[1]).abs() < 1e-8, "{p:?} vs {expect:?}");
        }
    }
}

#[test]
fn piola_round_trip_at_quadrature_points() {
    let (mm, _) = swirl_fixture(6, 0.5, 0.05).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let eta = random_field(mm.n_nodes(), &mut rng);
    let rule = TriangleRule::of_degree(4);
    for l in 0..mm.layers() {
        let there = piola_apply(&mm, PiolaDirection::Inverse, &eta, l).unwrap();
        let back = piola_apply(&mm, PiolaDirection::Forward, &there, l).unwrap();
        let mut worst: f64 = 0.0;
        for (t, tri) in mm.layout.tri_nodes.iter().enumerate() {
            let at = AffineTriangle::new(mm.reference.tri_coords(t));
            for lam in &rule.points {
                let (phi, dphi) = (p2_values(*lam), at.p2_gradients(*lam));
                let (a, _) = eval_vector(tri, &back, &phi, &dphi);
                let (b, _) = eval_vector(tri, &eta, &phi, &dphi);
                worst = worst.max((a[0] - b[0]).abs().max((a[1] - b[1]).abs()));
            }
        }
        assert!(worst <= 1e-10, "layer {l}: {worst:e}");
    }
}

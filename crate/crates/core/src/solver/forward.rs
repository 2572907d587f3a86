//! Backward-Euler ALE time stepping on a moving P2–P1 mesh.
//!
//! On layer n the unknown u satisfies, for all zero-trace v and all q,
//!
//! ```text
//! ((u − ū)/dt, v) + (((a − ẋ)·∇)u, v) + (ν(D a) Du, Dv) − (p, div v) = (f, v)
//!                                                        −(q, div u) = 0
//! ```
//!
//! with ū the previous nodal values carried along by the mesh, ẋ the nodal
//! mesh velocity, a the Picard guess and u = g on the boundary, where g is
//! the nodal interpolant of the driving field with boundary midpoints
//! shifted along the normal so that every edge carries the exact flux
//! ψ(b) − ψ(a). Each M of the continuation schedule marches the full
//! horizon; later values start their Picard iterations from the previous
//! M's solution on the same layer.

use super::config::{ForceField, InitialData, InitialMode, PicardInit, SolverConfig};
use super::energy::{EnergyLedger, LedgerRecord};
use crate::discretization::assembly::{
    assemble_elements, build_constrained, build_unconstrained, discrete_divergence_norm, divergence_moments,
    eval_vector, flatten, frob, p1_mass, solve_divergence_lift, split_solution, sym, Constraints, ElementSystem,
    FormCoeffs, Viscous,
};
use crate::discretization::element::p2_values;
use crate::discretization::{FlowState, LayerGeometry, MovingMesh, TriangleRule};
use crate::error::{Error, Result};
use crate::geometry::polygon::segment_distance_sq;
use crate::geometry::{DrivingField, HoldAll, VelocityFieldSpec, VelocityParams};
use crate::linalg::{norm2, SparseLu};
use crate::rheology::RheologyParams;
use log::{debug, warn};
use serde::{Deserialize, Serialize};

/// Everything a forward solve needs besides the numerical settings.
pub struct ForwardProblem<'a> {
    pub mesh: &'a MovingMesh,
    pub drive: &'a dyn DrivingField,
    pub rheology: &'a RheologyParams,
    pub initial: &'a InitialData,
    pub hold_all: &'a HoldAll,
    pub force: ForceField<'a>,
}

/// Convergence record of one Picard solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardRecord {
    pub m: f64,
    pub layer: usize,
    /// Relative increments ‖u_{k+1} − u_k‖ / ‖u_{k+1}‖.
    pub increments: Vec<f64>,
    /// Whether the last three increments decrease.
    pub monotone_tail: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardSolution {
    pub state: FlowState,
    pub ledger: EnergyLedger,
    pub picard: Vec<PicardRecord>,
    /// 1/M of the returned state (0 without regularization).
    pub inv_m: f64,
    /// ‖w₀‖ in L²(Ω₀).
    pub initial_w_norm: f64,
}

/// Nodal Dirichlet lift of the driving field on one layer.
pub fn boundary_lift(geom: &LayerGeometry, drive: &dyn DrivingField, t: f64) -> Vec<[f64; 2]> {
    let mut g: Vec<[f64; 2]> = geom.nodes.iter().map(|&x| drive.velocity(t, x)).collect();
    for &[a, b, m] in &geom.layout.boundary_edges {
        let (xa, xb) = (geom.nodes[a], geom.nodes[b]);
        let d = [xb[0] - xa[0], xb[1] - xa[1]];
        let len = d[0].hypot(d[1]);
        let n = [d[1] / len, -d[0] / len];
        let dot = |v: [f64; 2]| v[0] * n[0] + v[1] * n[1];
        let flux = drive.stream(t, xb) - drive.stream(t, xa);
        let target_mid = (6.0 * flux / len - dot(g[a]) - dot(g[b])) / 4.0;
        let delta = target_mid - dot(g[m]);
        g[m][0] += delta * n[0];
        g[m][1] += delta * n[1];
    }
    g
}

fn sub(a: &[[f64; 2]], b: &[[f64; 2]]) -> Vec<[f64; 2]> {
    a.iter().zip(b).map(|(x, y)| [x[0] - y[0], x[1] - y[1]]).collect()
}

/// Adds the zero-trace correction that makes `u` discretely divergence-free.
pub fn correct_divergence(geom: &LayerGeometry, u: &[[f64; 2]], lu: &mut SparseLu) -> Result<Vec<[f64; 2]>> {
    let r = divergence_moments(geom, u);
    if norm2(&r) == 0.0 {
        return Ok(u.to_vec());
    }
    let m = p1_mass(geom);
    let proj = SparseLu::new().factorize(&m)?.solve_refined(&m, &r, 1);
    let target: Vec<f64> = proj.iter().map(|v| -v).collect();
    let (c, _) = solve_divergence_lift(geom, &target, lu)?;
    Ok(u.iter().zip(&c).map(|(a, b)| [a[0] + b[0], a[1] + b[1]]).collect())
}

fn perturbation_field(init: &InitialData, mm: &MovingMesh, hold_all: &HoldAll) -> Result<Option<VelocityFieldSpec>> {
    if init.mode == InitialMode::MatchV || init.perturbation.is_empty() {
        return Ok(None);
    }
    let verts = mm.layer_vertices(0);
    for (i, b) in init.perturbation.iter().enumerate() {
        let inside = (0..mm.reference.n_triangles()).any(|t| {
            let tri = crate::discretization::element::AffineTriangle::new(mm.reference.tri_coords(t));
            tri.barycentric(b.center).iter().all(|&l| l >= -1e-12)
        });
        let clearance = mm
            .reference
            .boundary_edges
            .iter()
            .map(|&[a, c]| segment_distance_sq(b.center, verts[a], verts[c]).sqrt())
            .fold(f64::INFINITY, f64::min);
        if !inside || clearance < b.radius {
            return Err(Error::Config(format!(
                "initial perturbation bump {i} is not supported inside the initial domain \
                 (clearance {clearance:.4} < radius {})",
                b.radius
            )));
        }
    }
    let params = VelocityParams {
        bumps: init.perturbation.clone(),
        c_v: f64::MAX,
        margin: 0.0,
    };
    Ok(Some(VelocityFieldSpec::certify(params, hold_all)?))
}

fn l2_norm(geom: &LayerGeometry, rule: &TriangleRule, u: &[[f64; 2]]) -> f64 {
    crate::discretization::integrate::layer_integral(geom, rule, 0.0, u, &|q| q.u[0] * q.u[0] + q.u[1] * q.u[1]).sqrt()
}

/// Discretely divergence-free initial velocity on layer 0.
pub fn initial_velocity(p: &ForwardProblem, lu: &mut SparseLu) -> Result<Vec<[f64; 2]>> {
    let mm = p.mesh;
    let nodes = mm.layer_nodes(0);
    let geom = LayerGeometry::new(&mm.layout, &nodes);
    let mut u = boundary_lift(&geom, p.drive, 0.0);
    if let Some(pert) = perturbation_field(p.initial, mm, p.hold_all)? {
        for (ui, x) in u.iter_mut().zip(&nodes) {
            let v = pert.velocity_at(0.0, *x);
            ui[0] += v[0];
            ui[1] += v[1];
        }
    }
    correct_divergence(&geom, &u, lu)
}

struct StepOutput {
    u: Vec<[f64; 2]>,
    p: Vec<f64>,
    guess: Vec<[f64; 2]>,
    elements: Vec<ElementSystem>,
    increments: Vec<f64>,
}

struct StepInput<'a> {
    geom: LayerGeometry<'a>,
    layer: usize,
    t: f64,
    dt: f64,
    inv_m: f64,
    g: &'a [[f64; 2]],
    previous: &'a [[f64; 2]],
    mesh_velocity: &'a [[f64; 2]],
    guess: Vec<[f64; 2]>,
}

fn picard_step(p: &ForwardProblem, cfg: &SolverConfig, rule: &TriangleRule, s: StepInput, lu: &mut SparseLu) -> Result<StepOutput> {
    let geom = s.geom;
    let mut cons = Constraints::boundary_velocity(&geom, s.g);
    cons.pin(geom.pressure_dof(0), 0.0);
    let force = |x| (p.force)(s.t, x);
    let mut guess = s.guess;
    let mut increments = Vec::new();
    for it in 0..cfg.picard_max {
        let advect = sub(&guess, s.mesh_velocity);
        let coeffs = FormCoeffs {
            mass: 1.0 / s.dt,
            viscous: Some(Viscous {
                guess: &guess,
                rheology: p.rheology,
                inv_m: s.inv_m,
            }),
            advect: Some(&advect),
            pressure: true,
            rhs_previous: Some(s.previous),
            force: Some(&force),
            ..Default::default()
        };
        let elements = assemble_elements(&geom, rule, &coeffs);
        let (a, b) = build_constrained(geom.n_dofs(), &elements, &cons);
        let factors = lu.factorize(&a).map_err(|e| match e {
            Error::Singular { column, .. } => Error::Singular {
                context: format!("layer {}, Picard iteration {it}", s.layer),
                column,
            },
            other => other,
        })?;
        let x = factors.solve_refined(&a, &b, 2);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("solution at layer {}, Picard iteration {it}", s.layer)));
        }
        let (u, mut pr) = split_solution(&geom, &x);
        let nu = norm2(&flatten(&u));
        let inc = norm2(&flatten(&sub(&u, &guess)));
        let rel = if nu > 0.0 { inc / nu } else { 0.0 };
        increments.push(rel);
        if inc <= cfg.picard_tol * nu || inc <= 1e-14 {
            zero_mean(&geom, &mut pr);
            return Ok(StepOutput {
                u,
                p: pr,
                guess,
                elements,
                increments,
            });
        }
        guess = u;
    }
    Err(Error::PicardDivergence {
        layer: s.layer,
        m: if s.inv_m == 0.0 { f64::INFINITY } else { 1.0 / s.inv_m },
        history: increments,
    })
}

fn zero_mean(geom: &LayerGeometry, p: &mut [f64]) {
    let (mut num, mut den) = (0.0, 0.0);
    for t in 0..geom.n_triangles() {
        let tri = geom.triangle(t);
        let n = &geom.layout.tri_nodes[t];
        num += tri.area * (p[n[0]] + p[n[1]] + p[n[2]]) / 3.0;
        den += tri.area;
    }
    let mean = num / den;
    p.iter_mut().for_each(|v| *v -= mean);
}

/// Terms of the discrete energy identity on one layer, tested with w = u − g.
#[allow(clippy::too_many_arguments)]
fn ledger_terms(
    p: &ForwardProblem,
    rule: &TriangleRule,
    s: &StepInput,
    out: &StepOutput,
    g_prev: &[[f64; 2]],
    kinetic_prev: f64,
) -> LedgerRecord {
    let geom = &s.geom;
    let w = sub(&out.u, s.g);
    let w_bar = sub(s.previous, g_prev);
    let advect = sub(&out.guess, s.mesh_velocity);
    let (q, pexp) = (p.rheology.q, p.rheology.p);
    let mut acc = [0.0f64; 9];
    for tr in 0..geom.n_triangles() {
        let tri = geom.triangle(tr);
        let nodes = &geom.layout.tri_nodes[tr];
        for (l, &w0) in rule.points.iter().zip(&rule.weights) {
            let wt = w0 * tri.area;
            let phi = p2_values(*l);
            let dphi = tri.p2_gradients(*l);
            let x = tri.point(*l);
            let (_, ug) = eval_vector(nodes, &out.u, &phi, &dphi);
            let (wv, wg) = eval_vector(nodes, &w, &phi, &dphi);
            let (wb, _) = eval_vector(nodes, &w_bar, &phi, &dphi);
            let (gv, _) = eval_vector(nodes, s.g, &phi, &dphi);
            let (gp, _) = eval_vector(nodes, g_prev, &phi, &dphi);
            let (_, ag) = eval_vector(nodes, &out.guess, &phi, &dphi);
            let (av, _) = eval_vector(nodes, &advect, &phi, &dphi);
            let pv = l[0] * out.p[nodes[0]] + l[1] * out.p[nodes[1]] + l[2] * out.p[nodes[2]];
            let f = (p.force)(s.t, x);

            let du = sym(&ug);
            let dw = sym(&wg);
            let nu = p.rheology.viscosity(frob(&sym(&ag)), s.inv_m);
            let dwn = frob(&dw);
            let conv = [
                av[0] * ug[0][0] + av[1] * ug[0][1],
                av[0] * ug[1][0] + av[1] * ug[1][1],
            ];
            let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
            let diff = [wv[0] - wb[0], wv[1] - wb[1]];
            let dg = [(gv[0] - gp[0]) / s.dt, (gv[1] - gp[1]) / s.dt];

            acc[0] += wt * 0.5 * dot(wv, wv);
            acc[1] += wt * 0.5 * dot(wb, wb);
            acc[2] += wt * 0.5 * dot(diff, diff);
            acc[3] += wt * nu * (du[0][0] * dw[0][0] + 2.0 * du[0][1] * dw[0][1] + du[1][1] * dw[1][1]);
            acc[4] += wt * dwn.powf(q);
            acc[5] += wt * s.inv_m * dwn.powf(pexp);
            acc[6] += wt * (dot(f, wv) - dot(dg, wv));
            acc[7] += wt * -dot(conv, wv);
            acc[8] += wt * pv * (wg[0][0] + wg[1][1]);
        }
    }
    let [kinetic, carried, num_diss, visc, diss_q, diss_reg, forcing, convective, pressure] = acc;
    let work = forcing + convective + pressure;
    let mesh_exchange = carried - kinetic_prev;
    let residual = (kinetic - kinetic_prev) - mesh_exchange + num_diss + s.dt * visc - s.dt * work;

    let (am, bv) = build_unconstrained(geom.n_dofs(), &out.elements);
    let mut x = flatten(&out.u);
    x.extend_from_slice(&out.p);
    let r = am.mul_vec(&x);
    let assembled: f64 = flatten(&w).iter().enumerate().map(|(i, wi)| wi * (r[i] - bv[i])).sum::<f64>() * s.dt;

    LedgerRecord {
        layer: s.layer,
        t: s.t,
        kinetic,
        mesh_exchange,
        numerical_dissipation: num_diss,
        viscous: visc,
        dissipation_q: diss_q,
        dissipation_reg: diss_reg,
        forcing,
        convective,
        pressure,
        residual,
        assembled_residual: assembled,
        divergence: 0.0,
        picard_iterations: out.increments.len(),
    }
}

/// Solves the forward problem over the mesh's time grid.
pub fn solve_forward(p: &ForwardProblem, cfg: &SolverConfig) -> Result<ForwardSolution> {
    cfg.validate()?;
    p.rheology.validate()?;
    let mm = p.mesh;
    if (cfg.dt - mm.grid.dt).abs() > 1e-12 * mm.grid.dt.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "solver dt = {} does not match the flow-map grid step {}",
            cfg.dt, mm.grid.dt
        )));
    }
    let schedule = cfg.m_schedule.clone().unwrap_or_else(|| p.rheology.m_schedule.clone());
    if let Some(s) = &cfg.m_schedule {
        RheologyParams::new(p.rheology.q, p.rheology.p, s.clone())?;
    }
    let inv_ms: Vec<f64> = if schedule.is_empty() { vec![0.0] } else { schedule.iter().map(|m| 1.0 / m).collect() };

    let rule = TriangleRule::of_degree(cfg.quadrature_degree);
    let div_rule = TriangleRule::of_degree(4);
    let mut lu = SparseLu::new();
    let layers = mm.layers();
    let times = mm.grid.times();
    let u0 = initial_velocity(p, &mut lu)?;

    let layer_nodes: Vec<_> = (0..layers).map(|l| mm.layer_nodes(l)).collect();
    let lifts: Vec<Vec<[f64; 2]>> = (0..layers)
        .map(|l| boundary_lift(&LayerGeometry::new(&mm.layout, &layer_nodes[l]), p.drive, times[l]))
        .collect();
    let geom0 = LayerGeometry::new(&mm.layout, &layer_nodes[0]);
    let w0 = sub(&u0, &lifts[0]);
    let initial_w_norm = l2_norm(&geom0, &div_rule, &w0);

    let mut previous_run: Option<FlowState> = None;
    let mut picard = Vec::new();
    let mut result = None;
    for (mi, &inv_m) in inv_ms.iter().enumerate() {
        let mut state = FlowState::zeros(times.clone(), mm.n_nodes(), mm.layout.n_vertices);
        state.velocity[0] = u0.clone();
        let mut records = vec![LedgerRecord::initial(0.5 * initial_w_norm * initial_w_norm)];
        records[0].divergence = discrete_divergence_norm(&geom0, &u0)?;
        for l in 1..layers {
            let geom = LayerGeometry::new(&mm.layout, &layer_nodes[l]);
            let mesh_velocity = mm.mesh_velocity(l);
            let guess = match (&previous_run, cfg.picard_init) {
                (Some(prev), _) => prev.velocity[l].clone(),
                (None, PicardInit::PreviousStep) => state.velocity[l - 1].clone(),
                (None, PicardInit::BoundaryLift) => lifts[l].clone(),
            };
            let input = StepInput {
                geom,
                layer: l,
                t: times[l],
                dt: cfg.dt,
                inv_m,
                g: &lifts[l],
                previous: &state.velocity[l - 1],
                mesh_velocity: &mesh_velocity,
                guess,
            };
            let out = picard_step(p, cfg, &rule, input, &mut lu)?;
            let n = out.increments.len();
            let monotone_tail = n < 3 || out.increments[n - 3..].windows(2).all(|w| w[1] <= w[0]);
            if !monotone_tail {
                warn!("Picard increments not monotone at layer {l}: {:?}", out.increments);
            }
            picard.push(PicardRecord {
                m: if inv_m == 0.0 { f64::INFINITY } else { 1.0 / inv_m },
                layer: l,
                increments: out.increments.clone(),
                monotone_tail,
            });
            let input = StepInput {
                geom,
                layer: l,
                t: times[l],
                dt: cfg.dt,
                inv_m,
                g: &lifts[l],
                previous: &state.velocity[l - 1],
                mesh_velocity: &mesh_velocity,
                guess: Vec::new(),
            };
            let kinetic_prev = records[l - 1].kinetic;
            let mut rec = ledger_terms(p, &rule, &input, &out, &lifts[l - 1], kinetic_prev);
            rec.divergence = discrete_divergence_norm(&geom, &out.u)?;
            debug!(
                "m #{mi} layer {l}: {} Picard iterations, residual {:.3e}",
                rec.picard_iterations, rec.residual
            );
            records.push(rec);
            state.velocity[l] = out.u;
            state.pressure[l] = out.p;
        }
        let ledger = EnergyLedger {
            q: p.rheology.q,
            p: p.rheology.p,
            inv_m,
            dt: cfg.dt,
            records,
        };
        result = Some((state.clone(), ledger));
        previous_run = Some(state);
    }
    let (state, ledger) = result.expect("at least one continuation value");
    Ok(ForwardSolution {
        state,
        ledger,
        picard,
        inv_m: *inv_ms.last().unwrap(),
        initial_w_norm,
    })
}

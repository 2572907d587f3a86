//! One line per acceptance criterion, printed whether it passes or not.
//!
//! Criteria run one at a time under a shared lock so the reported wall
//! times are not inflated by the other criteria.

use hemoshape::analysis::{run_suite, Suite, VerifyOptions};
use hemoshape::analysis::verify::swirl_fixture;
use hemoshape::config::{RunConfig, RunManifest};
use hemoshape::discretization::assembly::eval_vector;
use hemoshape::discretization::element::{p2_values, AffineTriangle};
use hemoshape::discretization::{piola_apply, PiolaDirection, TriangleRule};
use hemoshape::geometry::{integrate_flow_map, HoldAll, Profile, StreamBump, TimeGrid, VelocityFieldSpec, VelocityParams};
use hemoshape::optimizer::{minimize, Objective, OptimizerState};
use hemoshape::rheology::{conjugate, RheologyParams};
use hemoshape::solver::mms::{observed_orders, run_mms, Manufactured, TimeProfile};
use hemoshape::solver::{energy_bound, energy_check, BoundInputs, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

static SERIAL: Mutex<()> = Mutex::new(());

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn shipped_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(configs_dir())
        .unwrap()
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.ends_with(".json"))
        .collect();
    names.sort();
    names
}

fn shipped(name: &str) -> RunConfig {
    RunConfig::load(&configs_dir().join(name)).unwrap()
}

/// Runs one criterion under the lock, prints its line outside the test
/// capture and fails the test if it did not pass or ran over its budget.
fn criterion(id: u32, title: &str, budget_s: f64, body: impl FnOnce() -> (bool, String)) {
    let guard = SERIAL.lock().unwrap_or_else(|p| p.into_inner());
    let start = Instant::now();
    let (pass, detail) = body();
    let secs = start.elapsed().as_secs_f64();
    drop(guard);
    let ok = pass && secs < budget_s;
    let line = format!(
        "criterion {id:>2} {}: {title}: {detail} [{secs:.1} s, budget {budget_s} s]\n",
        if ok { "PASS" } else { "FAIL" }
    );
    std::io::stdout().write_all(line.as_bytes()).unwrap();
    assert!(ok, "{line}");
}

fn suite_detail(suite: Suite, opts: &VerifyOptions) -> (bool, String) {
    let report = run_suite(suite, opts);
    let failing: Vec<String> = report
        .suites
        .iter()
        .flat_map(|s| s.checks.iter().filter(|c| !c.pass).map(|c| format!("{} = {:e} ({})", c.name, c.value, c.rule)))
        .collect();
    let checks: usize = report.suites.iter().map(|s| s.checks.len()).sum();
    if failing.is_empty() {
        (report.pass, format!("{checks} checks"))
    } else {
        (false, failing.join("; "))
    }
}

#[test]
fn criterion_01_rheology() {
    criterion(1, "rheology coercivity, growth and strict monotonicity", 10.0, || {
        suite_detail(Suite::Rheology, &VerifyOptions::default())
    });
}

fn mms_orders(rheology: RheologyParams) -> Vec<f64> {
    let man = Manufactured::new(rheology, TimeProfile::Linear);
    let cfg = SolverConfig::new(1e-3);
    let (h, e): (Vec<f64>, Vec<f64>) = [4, 8, 16]
        .iter()
        .map(|&n| {
            let r = run_mms(&man, n, 0.01, &cfg).unwrap();
            (r.h, r.error_l2l2)
        })
        .unzip();
    observed_orders(&h, &e)
}

#[test]
fn criterion_02_newtonian_mms() {
    criterion(2, "Newtonian manufactured solution, spatial order >= 1.9", 300.0, || {
        let orders = mms_orders(RheologyParams::newtonian());
        (orders.iter().all(|&o| o >= 1.9), format!("orders {orders:.3?}"))
    });
}

#[test]
fn criterion_03_shear_thinning_mms() {
    criterion(3, "shear-thinning (q = 1.5) manufactured solution, spatial order >= 1.0", 600.0, || {
        let orders = mms_orders(RheologyParams::new(1.5, 5.0, vec![]).unwrap());
        (orders.iter().all(|&o| o >= 1.0), format!("orders {orders:.3?}"))
    });
}

struct FamilyMember {
    radius: f64,
    value: f64,
    c_bound: f64,
    lhs: f64,
    residual: f64,
}

fn family_run(base: &RunConfig, radius: f64) -> FamilyMember {
    let mut cfg = base.clone();
    cfg.domain.radial_coeffs.r0 = radius;
    let (domain, velocity) = (cfg.domain_spec().unwrap(), cfg.velocity_spec().unwrap());
    let run = cfg.flow_setup().unwrap().run(&domain, &velocity, 1).unwrap();
    let sol = run.outcome.solutions().next().unwrap();
    let q = cfg.rheology.q;
    let force = cfg.solver.force.norm_power(conjugate(q), cfg.hold_all.cylinder_volume());
    let bound = energy_bound(&BoundInputs::for_hold_all(&cfg.hold_all, q, velocity.c_v(), sol.initial_w_norm, force));
    FamilyMember {
        radius,
        value: run.value.value,
        c_bound: bound.c_bound,
        lhs: sol.ledger.estimate_lhs(),
        residual: sol.ledger.max_relative_residual(),
    }
}

/// Disks of radius 1 + 1/k for k = 1..8, then the limit disk, all on the
/// family config's mesh resolution.
fn disk_family() -> &'static [FamilyMember] {
    static FAMILY: OnceLock<Vec<FamilyMember>> = OnceLock::new();
    FAMILY.get_or_init(|| {
        let base = shipped("disk_family.json");
        (1..=8).map(|k| 1.0 + 1.0 / k as f64).chain([1.0]).map(|r| family_run(&base, r)).collect()
    })
}

#[test]
fn criterion_04_energy_identity_and_uniform_bound() {
    criterion(4, "energy identity on shipped configs, one bound across the disk family", 900.0, || {
        let mut worst: f64 = 0.0;
        let mut notes = Vec::new();
        for name in shipped_names() {
            let cfg = shipped(&name);
            let (domain, velocity) = (cfg.domain_spec().unwrap(), cfg.velocity_spec().unwrap());
            let setup = cfg.flow_setup().unwrap();
            let run = setup.run(&domain, &velocity, setup.ensemble.len()).unwrap();
            if !run.outcome.failures.is_empty() {
                notes.push(format!("{name}: {:?}", run.outcome.failures));
            }
            for sol in run.outcome.solutions() {
                let check = energy_check(&sol.ledger, f64::MAX);
                if !check.residual_ok {
                    notes.push(format!("{name}: residual {:e}", check.max_relative_residual));
                }
                worst = worst.max(check.max_relative_residual);
            }
        }
        let family = disk_family();
        // the bound grows with ‖w₀‖, so the largest member bound covers the whole family
        let c = family.iter().map(|m| m.c_bound).fold(0.0, f64::max);
        let uniform = c.is_finite() && family.iter().all(|m| m.lhs <= c);
        let lhs = family.iter().map(|m| m.lhs).fold(0.0, f64::max);
        let family_residual = family.iter().map(|m| m.residual).fold(0.0, f64::max);
        let pass = notes.is_empty() && uniform && lhs <= c && family_residual <= 1e-6;
        (
            pass,
            format!(
                "max residual {:.2e} over {} configs, family residual {family_residual:.2e}, max lhs {lhs:.3e} <= C = {c:.3e}{}{}",
                worst,
                shipped_names().len(),
                if uniform { "" } else { ", some member exceeds the family bound" },
                if notes.is_empty() { String::new() } else { format!(", {}", notes.join("; ")) }
            ),
        )
    });
}

#[test]
fn criterion_05_shape_continuity() {
    criterion(5, "hemolysis functional converges along the disk family", 1200.0, || {
        let family = disk_family();
        let (terms, proxy) = family.split_at(8);
        let proxy = proxy[0].value;
        let gaps: Vec<f64> = terms.iter().map(|m| (m.value - proxy).abs() / proxy.abs()).collect();
        let tail = &gaps[4..];
        let decreasing = tail.windows(2).all(|w| w[1] < w[0]);
        let last = gaps[7];
        (
            proxy > 0.0 && decreasing && last < 0.05,
            format!(
                "J_inf {proxy:.6e}, relative gaps {:.2e} (radius {:.3}) .. {last:.2e} (radius {:.3}), last four decreasing: {decreasing}",
                gaps[0], terms[0].radius, terms[7].radius
            ),
        )
    });
}

#[test]
fn criterion_06_flow_map() {
    criterion(6, "flow map determinant, rigid rotation and Lipschitz bound", 10.0, || {
        let cfg = shipped("disk_swirl.json");
        let velocity = cfg.velocity_spec().unwrap();
        let domain = cfg.domain_spec().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut pts = Vec::new();
        while pts.len() < 400 {
            let p = [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
            if domain.contains(p) {
                pts.push(p);
            }
        }
        let horizon = cfg.hold_all.horizon;
        let fm = integrate_flow_map(&velocity, &cfg.hold_all, &pts, TimeGrid::new(horizon, 0.05).unwrap(), 1e-3).unwrap();
        let det_defect = fm.max_det_defect();
        let limit = (velocity.certified_bound() * horizon).exp();
        let mut lipschitz: f64 = 0.0;
        for layer in &fm.positions {
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    let d0 = ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
                    let d1 = ((layer[i][0] - layer[j][0]).powi(2) + (layer[i][1] - layer[j][1]).powi(2)).sqrt();
                    lipschitz = lipschitz.max(d1 / d0);
                }
            }
        }

        let half_pi = std::f64::consts::FRAC_PI_2;
        let hold = HoldAll::new([-2.0, -2.0], [2.0, 2.0], half_pi).unwrap();
        let rotation = VelocityFieldSpec::certify(
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
        let disk: Vec<[f64; 2]> = pts.iter().map(|p| [p[0] * 0.6, p[1] * 0.6]).collect();
        let grid = TimeGrid::new(half_pi, half_pi / 4.0).unwrap();
        let rot = integrate_flow_map(&rotation, &hold, &disk, grid, half_pi / 400.0).unwrap();
        let mut rotation_error: f64 = 0.0;
        for (l, layer) in rot.positions.iter().enumerate() {
            let (s, c) = grid.time(l).sin_cos();
            for (x, x0) in layer.iter().zip(&disk) {
                let expect = [c * x0[0] - s * x0[1], s * x0[0] + c * x0[1]];
                rotation_error = rotation_error.max((x[0] - expect[0]).abs().max((x[1] - expect[1]).abs()));
            }
        }
        (
            det_defect <= 1e-6 && rotation_error <= 1e-8 && lipschitz <= limit,
            format!(
                "|det - 1| {det_defect:.2e}, rotation error {rotation_error:.2e}, Lipschitz ratio {lipschitz:.4} <= exp(c_V T) = {limit:.4}"
            ),
        )
    });
}

#[test]
fn criterion_07_piola() {
    criterion(7, "Piola round trip at quadrature points and divergence on three meshes", 30.0, || {
        let (suite_pass, suite) = suite_detail(Suite::Piola, &VerifyOptions::default());
        let (mm, _) = swirl_fixture(6, 0.5, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let eta: Vec<[f64; 2]> = (0..mm.n_nodes()).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let rule = TriangleRule::of_degree(4);
        let mut worst: f64 = 0.0;
        for l in 0..mm.layers() {
            let there = piola_apply(&mm, PiolaDirection::Inverse, &eta, l).unwrap();
            let back = piola_apply(&mm, PiolaDirection::Forward, &there, l).unwrap();
            for (t, tri) in mm.layout.tri_nodes.iter().enumerate() {
                let at = AffineTriangle::new(mm.reference.tri_coords(t));
                for lam in &rule.points {
                    let (phi, dphi) = (p2_values(*lam), at.p2_gradients(*lam));
                    let (a, _) = eval_vector(tri, &back, &phi, &dphi);
                    let (b, _) = eval_vector(tri, &eta, &phi, &dphi);
                    worst = worst.max((a[0] - b[0]).abs().max((a[1] - b[1]).abs()));
                }
            }
        }
        (suite_pass && worst <= 1e-10, format!("quadrature round trip {worst:.2e}, suite: {suite}"))
    });
}

#[test]
fn criterion_08_bogovskii() {
    criterion(8, "Bogovskii divergence defect and constant drift", 120.0, || {
        suite_detail(Suite::Bogovskii, &VerifyOptions::default())
    });
}

#[test]
fn criterion_09_korn() {
    criterion(9, "Korn constant for p = 2 and identity residual", 60.0, || {
        suite_detail(Suite::Korn, &VerifyOptions::default())
    });
}

#[test]
fn criterion_10_projector() {
    criterion(10, "solenoidal projector divergence, support and self-convergence", 300.0, || {
        suite_detail(Suite::Projector, &VerifyOptions::default())
    });
}

fn optimize(cfg: &RunConfig, previous: Option<OptimizerState>) -> OptimizerState {
    let space = cfg.param_space();
    let area = cfg.area_objective();
    let flow = cfg.flow_setup().unwrap();
    let objective: &dyn Objective = match &area {
        Some(a) => a,
        None => &flow,
    };
    minimize(&space, objective, &cfg.optimizer_config(), previous).unwrap()
}

#[test]
fn criterion_11_optimizer() {
    criterion(11, "optimizer solves the disk-radius problem, stays monotone, resumes", 3600.0, || {
        let area = shipped("area_optimize.json");
        let start = Instant::now();
        let solved = optimize(&area, None);
        let synthetic_secs = start.elapsed().as_secs_f64();
        let synthetic = solved.best_value() < 1e-3 && solved.evaluations <= 200 && synthetic_secs < 60.0;

        let mut half = area.clone();
        half.optimizer.budget = 100;
        let first = optimize(&half, None);
        let first_best = first.best_value();
        let resumed = optimize(&half, Some(first));
        let resume_ok = resumed.is_monotone() && resumed.best_value() <= first_best;

        let smoke = optimize(&shipped("hemolysis_optimize.json"), None);
        let feasible = smoke.history.iter().filter(|h| h.feasible).count();
        let smoke_ok = feasible > 0 && smoke.is_monotone() && smoke.best_value() >= 0.0;
        (
            synthetic && solved.is_monotone() && resume_ok && smoke_ok,
            format!(
                "area best {:.2e} after {} evaluations in {synthetic_secs:.2} s, resume {:.2e} -> {:.2e} monotone {}, hemolysis smoke best {:.3e} with {feasible}/{} feasible monotone {}",
                solved.best_value(),
                solved.evaluations,
                first_best,
                resumed.best_value(),
                resumed.is_monotone(),
                smoke.best_value(),
                smoke.evaluations,
                smoke.is_monotone()
            ),
        )
    });
}

fn cli(args: &[&str], out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_hemoshape"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("HEMOSHAPE_OUT_DIR")
        .env_remove("HEMOSHAPE_THREADS")
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

/// Every file the manifest lists, with its bytes. The manifest itself holds
/// wall times and is excluded.
fn exported(dir: &Path) -> Vec<(String, Vec<u8>)> {
    RunManifest::load(dir)
        .unwrap()
        .files
        .iter()
        .map(|f| (f.path.clone(), std::fs::read(dir.join(&f.path)).unwrap()))
        .collect()
}

#[test]
fn criterion_12_determinism() {
    criterion(12, "reruns at 1 and 4 threads are bit-identical", 1800.0, || {
        let tmp = tempfile::tempdir().unwrap();
        let mut runs = Vec::new();
        for name in shipped_names() {
            let cfg = configs_dir().join(&name);
            let cfg = cfg.to_str().unwrap();
            let mut commands = vec!["simulate"];
            if name.contains("optimize") {
                commands.push("optimize");
            }
            for command in commands {
                runs.push(format!("{command} {name}"));
                let outs: Vec<PathBuf> = ["1", "4", "1"]
                    .iter()
                    .enumerate()
                    .map(|(i, threads)| {
                        let out = tmp.path().join(format!("{name}-{command}-{i}"));
                        assert!(cli(&["--threads", threads, command, cfg], &out), "{command} {name} failed");
                        out
                    })
                    .collect();
                let reference = exported(&outs[0]);
                if reference.is_empty() || outs[1..].iter().any(|o| exported(o) != reference) {
                    return (false, format!("{command} {name} differs between reruns"));
                }
            }
        }
        (true, format!("{} runs compared: {}", runs.len(), runs.join(", ")))
    });
}

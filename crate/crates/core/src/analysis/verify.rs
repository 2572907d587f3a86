//! Verification suites with a machine-readable pass/fail report.

use super::bogovskii::{bogovskii, remove_mean};
use super::korn::{korn_constant, korn_identity_residual, poincare_constant, random_zero_trace};
use super::projector::{project_solenoidal_testfield, ProjectorConfig, TestField};
use crate::discretization::{discrete_divergence_norm, piola_apply, LayerGeometry, MovingMesh, P2Layout, PiolaDirection, TriMesh};
use crate::error::{Error, Result};
use crate::geometry::{DomainParams, DomainSpec, HoldAll, Profile, StreamBump, TimeGrid, VelocityFieldSpec, VelocityParams};
use crate::rheology::certify_inequalities;
use crate::Point;
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::str::FromStr;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Rheology,
    Bogovskii,
    Korn,
    Piola,
    Projector,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 6] = ["rheology", "bogovskii", "korn", "piola", "projector", "all"];

    pub fn expand(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![Suite::Rheology, Suite::Bogovskii, Suite::Korn, Suite::Piola, Suite::Projector],
            s => vec![s],
        }
    }

    pub fn name(self) -> &'static str {
        Self::NAMES[self as usize]
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::NAMES
            .iter()
            .position(|n| *n == s)
            .map(|i| {
                [Suite::Rheology, Suite::Bogovskii, Suite::Korn, Suite::Piola, Suite::Projector, Suite::All][i]
            })
            .ok_or_else(|| format!("unknown suite '{s}', expected one of {}", Self::NAMES.join("|")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyOptions {
    pub seed: u64,
    pub rheology_samples: usize,
    pub rheology_exponents: Vec<f64>,
    /// Unit-square cells per side for the Bogovskii refinement study.
    pub square_levels: Vec<usize>,
    /// Ring counts of the disk meshes used by the Piola checks.
    pub piola_rings: Vec<usize>,
    /// Cutoff indices of the projector self-convergence study.
    pub projector_levels: Vec<usize>,
    pub projector_rings: usize,
    pub projector_dt: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            rheology_samples: 100_000,
            rheology_exponents: vec![1.3, 1.5, 1.9],
            square_levels: vec![4, 8, 16],
            piola_rings: vec![4, 8, 16],
            projector_levels: vec![4, 8, 16],
            projector_rings: 32,
            projector_dt: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance rule, e.g. "<= 1e-10".
    pub rule: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub constants: BTreeMap<String, f64>,
    pub seconds: f64,
}

impl SuiteReport {
    fn new(suite: Suite) -> Self {
        Self {
            suite: suite.name().into(),
            pass: true,
            checks: Vec::new(),
            constants: BTreeMap::new(),
            seconds: 0.0,
        }
    }

    fn at_most(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.push(name, value, format!("<= {limit:e}"), value <= limit);
    }

    fn within(&mut self, name: impl Into<String>, value: f64, lo: f64, hi: f64) {
        self.push(name, value, format!("in [{lo}, {hi}]"), value >= lo && value <= hi);
    }

    fn push(&mut self, name: impl Into<String>, value: f64, rule: String, pass: bool) {
        let pass = pass && !value.is_nan();
        self.pass &= pass;
        self.checks.push(Check {
            name: name.into(),
            value,
            rule,
            pass,
        });
    }

    fn error(&mut self, name: impl Into<String>, e: &Error) {
        self.push(name, f64::NAN, format!("error: {e}"), false);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub pass: bool,
    pub suites: Vec<SuiteReport>,
}

/// Runs one suite, or all of them, and collects the results.
pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> VerifyReport {
    let suites: Vec<SuiteReport> = suite
        .expand()
        .into_iter()
        .map(|s| {
            let start = Instant::now();
            let mut r = SuiteReport::new(s);
            match s {
                Suite::Rheology => rheology(&mut r, opts),
                Suite::Bogovskii => bogovskii_suite(&mut r, opts),
                Suite::Korn => korn_suite(&mut r, opts),
                Suite::Piola => piola_suite(&mut r, opts),
                Suite::Projector => projector_suite(&mut r, opts),
                Suite::All => unreachable!("expanded"),
            }
            r.seconds = start.elapsed().as_secs_f64();
            info!("verify {}: {} in {:.1}s", r.suite, if r.pass { "pass" } else { "FAIL" }, r.seconds);
            r
        })
        .collect();
    VerifyReport {
        schema_version: crate::SCHEMA_VERSION,
        pass: suites.iter().all(|s| s.pass),
        suites,
    }
}

fn rheology(r: &mut SuiteReport, opts: &VerifyOptions) {
    for &q in &opts.rheology_exponents {
        for dim in [2usize, 3] {
            let cert = match dim {
                2 => certify_inequalities::<2>(q, opts.rheology_samples, opts.seed),
                _ => certify_inequalities::<3>(q, opts.rheology_samples, opts.seed),
            };
            let tag = format!("q{q}_d{dim}");
            match cert {
                Ok(c) => {
                    r.push(format!("{tag}_coercivity_margin"), c.coercivity_margin, ">= 0".into(), c.coercivity_margin >= 0.0);
                    r.push(format!("{tag}_growth_margin"), c.growth_margin, ">= 0".into(), c.growth_margin >= 0.0);
                    r.push(
                        format!("{tag}_monotonicity_margin"),
                        c.monotonicity_margin,
                        "> 0".into(),
                        c.monotonicity_margin > 0.0,
                    );
                }
                Err(e) => r.error(tag, &e),
            }
        }
    }
}

/// Standard hold-all for the verification fixtures.
pub fn fixture_hold_all(horizon: f64) -> HoldAll {
    HoldAll::new([-2.0, -2.0], [2.0, 2.0], horizon).expect("fixed box")
}

/// Five admissible star domains of moderate shape variation.
pub fn sample_domains() -> Vec<DomainSpec> {
    let h = fixture_hold_all(1.0);
    let shapes: [(f64, [f64; 2], [f64; 2]); 5] = [
        (1.0, [0.0, 0.0], [0.0, 0.0]),
        (1.0, [0.15, 0.0], [0.0, 0.0]),
        (0.9, [0.0, 0.1], [0.05, 0.0]),
        (1.1, [0.0, 0.0], [0.0, -0.08]),
        (1.0, [-0.1, 0.05], [0.05, 0.05]),
    ];
    shapes
        .iter()
        .map(|&(r0, c, s)| {
            let mut p = DomainParams::disk([0.0, 0.0], r0);
            p.radial_coeffs.cos = vec![0.0, c[0], c[1]];
            p.radial_coeffs.sin = vec![0.0, s[0], s[1]];
            DomainSpec::certify(p, &h).expect("sample domain is admissible")
        })
        .collect()
}

fn star_mesh(d: &DomainSpec, rings: usize) -> Result<TriMesh> {
    TriMesh::star(d.center(), |t| d.radius(t), rings)
}

fn random_zero_mean(geom: &LayerGeometry, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f: Vec<f64> = (0..geom.n_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    remove_mean(geom, &mut f);
    let (norm, _) = super::bogovskii::p1_norm_and_mean(geom, &f);
    f.iter_mut().for_each(|v| *v /= norm);
    f
}

fn drift(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max / min - 1.0
}

fn bogovskii_suite(r: &mut SuiteReport, opts: &VerifyOptions) {
    let run = |r: &mut SuiteReport, label: String, mesh: &TriMesh| -> Option<f64> {
        let layout = P2Layout::new(mesh);
        let nodes = layout.node_positions(&mesh.vertices);
        let geom = LayerGeometry::new(&layout, &nodes);
        let f = random_zero_mean(&geom, opts.seed);
        match bogovskii(&geom, &f) {
            Ok(b) => {
                r.at_most(format!("{label}_divergence_defect"), b.divergence_defect, 1e-10);
                r.constants.insert(format!("{label}_c_bogovskii"), b.constant);
                Some(b.constant)
            }
            Err(e) => {
                r.error(label, &e);
                None
            }
        }
    };
    let square: Vec<f64> = opts
        .square_levels
        .iter()
        .filter_map(|&n| run(r, format!("square{n}"), &TriMesh::rectangle([0.0, 0.0], [1.0, 1.0], n, n)))
        .collect();
    r.at_most("refinement_drift", drift(&square), 0.2);
    let domains: Vec<f64> = sample_domains()
        .iter()
        .enumerate()
        .filter_map(|(i, d)| star_mesh(d, 8).ok().and_then(|m| run(r, format!("domain{i}"), &m)))
        .collect();
    r.at_most("domain_drift", drift(&domains), 0.2);

    let mesh = TriMesh::rectangle([0.0, 0.0], [1.0, 1.0], 4, 4);
    let layout = P2Layout::new(&mesh);
    let nodes = layout.node_positions(&mesh.vertices);
    let geom = LayerGeometry::new(&layout, &nodes);
    let rejected = matches!(bogovskii(&geom, &vec![1.0; geom.n_vertices()]), Err(Error::Compatibility { .. }));
    r.push("rejects_nonzero_mean", rejected as u8 as f64, "== 1".into(), rejected);
}

fn korn_suite(r: &mut SuiteReport, opts: &VerifyOptions) {
    let root2 = std::f64::consts::SQRT_2;
    let mut meshes: Vec<(String, TriMesh)> = vec![("square8".into(), TriMesh::rectangle([0.0, 0.0], [1.0, 1.0], 8, 8))];
    for (i, d) in sample_domains().iter().enumerate() {
        match star_mesh(d, 8) {
            Ok(m) => meshes.push((format!("domain{i}"), m)),
            Err(e) => r.error(format!("domain{i}_mesh"), &e),
        }
    }
    let mut values = Vec::new();
    for (label, mesh) in &meshes {
        let layout = P2Layout::new(mesh);
        let nodes = layout.node_positions(&mesh.vertices);
        let geom = LayerGeometry::new(&layout, &nodes);
        match korn_constant(&geom, 2.0, 0, opts.seed) {
            Ok(k) => {
                r.within(format!("{label}_korn_p2"), k.value, root2 - 0.05, root2 + 1e-6);
                r.constants.insert(format!("{label}_c_korn"), k.value);
                values.push(k.value);
            }
            Err(e) => r.error(format!("{label}_korn_p2"), &e),
        }
        let worst = (0..5)
            .map(|s| korn_identity_residual(&geom, &random_zero_trace(&geom, opts.seed + s)).abs())
            .fold(0.0, f64::max);
        r.at_most(format!("{label}_identity_residual"), worst, 1e-12);
        match poincare_constant(&geom, opts.seed) {
            Ok(c) => {
                r.constants.insert(format!("{label}_c_poincare"), c);
            }
            Err(e) => r.error(format!("{label}_poincare"), &e),
        }
    }
    r.at_most("korn_drift", drift(&values), 0.2);
    if let Some(c) = r.constants.get("square8_c_poincare").copied() {
        let exact = 1.0 / (std::f64::consts::PI * root2);
        r.at_most("square_poincare_rel_error", (c - exact).abs() / exact, 1e-3);
    }
}

/// Unit disk transported by an off-centre vortex over [0, T].
pub fn swirl_fixture(rings: usize, horizon: f64, dt: f64) -> Result<(MovingMesh, HoldAll)> {
    let hold = fixture_hold_all(horizon);
    let domain = DomainSpec::certify(DomainParams::disk([0.0, 0.0], 1.0), &hold)?;
    let velocity = VelocityFieldSpec::certify(
        VelocityParams {
            bumps: vec![StreamBump {
                center: [0.3, 0.1],
                radius: 1.6,
                profile: Profile::Vortex { core: 0.7 },
                time_coeffs: vec![0.6, 0.3],
            }],
            c_v: 1.0e4,
            margin: 0.05,
        },
        &hold,
    )?;
    let mesh = star_mesh(&domain, rings)?;
    let grid = TimeGrid::new(horizon, dt)?;
    let mm = MovingMesh::transport(mesh, &velocity, &hold, grid, dt / 4.0, 0.05)?;
    Ok((mm, hold))
}

/// Divergence-free reference field rot((1 − |X|²)²) with zero trace on the unit disk.
fn disk_stream_field(x: Point) -> [f64; 2] {
    let s = 1.0 - x[0] * x[0] - x[1] * x[1];
    let d = [-4.0 * x[0] * s, -4.0 * x[1] * s];
    [d[1], -d[0]]
}

fn piola_suite(r: &mut SuiteReport, opts: &VerifyOptions) {
    let mut ratios = Vec::new();
    for &rings in &opts.piola_rings {
        let (mm, _) = match swirl_fixture(rings, 0.5, 0.05) {
            Ok(f) => f,
            Err(e) => {
                r.error(format!("rings{rings}_fixture"), &e);
                continue;
            }
        };
        let ref_nodes = mm.layout.node_positions(&mm.reference.vertices);
        let eta: Vec<[f64; 2]> = ref_nodes.iter().map(|&x| disk_stream_field(x)).collect();
        let ref_geom = LayerGeometry::new(&mm.layout, &ref_nodes);
        let ref_div = discrete_divergence_norm(&ref_geom, &eta).unwrap_or(f64::NAN);
        let mut round_trip: f64 = 0.0;
        let mut layer_div: f64 = 0.0;
        for l in 0..mm.layers() {
            let pushed = match piola_apply(&mm, PiolaDirection::Inverse, &eta, l) {
                Ok(p) => p,
                Err(e) => {
                    r.error(format!("rings{rings}_layer{l}"), &e);
                    continue;
                }
            };
            if let Ok(back) = piola_apply(&mm, PiolaDirection::Forward, &pushed, l) {
                for (a, b) in back.iter().zip(&eta) {
                    round_trip = round_trip.max((a[0] - b[0]).abs().max((a[1] - b[1]).abs()));
                }
            }
            let nodes = mm.layer_nodes(l);
            let geom = LayerGeometry::new(&mm.layout, &nodes);
            layer_div = layer_div.max(discrete_divergence_norm(&geom, &pushed).unwrap_or(f64::NAN));
        }
        r.at_most(format!("rings{rings}_round_trip"), round_trip, 1e-10);
        r.constants.insert(format!("rings{rings}_reference_divergence"), ref_div);
        r.constants.insert(format!("rings{rings}_layer_divergence"), layer_div);
        ratios.push(layer_div);
    }
    // transported divergence is an interpolation error and must decay under refinement
    for (i, w) in ratios.windows(2).enumerate() {
        r.push(format!("divergence_decay_{i}"), w[0] / w[1], "> 1.5".into(), w[0] / w[1] > 1.5);
    }
}

/// Smooth compactly supported solenoidal field in reference coordinates:
/// (1 − t/T) rot of a quartic bump of radius 0.2 at the origin.
pub fn projector_input(horizon: f64) -> impl Fn(f64, Point) -> [f64; 2] {
    move |t, x| {
        let rad = 0.2;
        let s = (x[0] * x[0] + x[1] * x[1]) / (rad * rad);
        if s >= 1.0 {
            return [0.0; 2];
        }
        // ψ = rad² (1 − s)⁴, ∇ψ = −8 x (1 − s)³
        let g = -8.0 * (1.0 - s).powi(3);
        let amp = 1.0 - t / horizon;
        [amp * g * x[1], -amp * g * x[0]]
    }
}

fn projector_suite(r: &mut SuiteReport, opts: &VerifyOptions) {
    let horizon = 1.0;
    let (mm, _) = match swirl_fixture(opts.projector_rings, horizon, opts.projector_dt) {
        Ok(f) => f,
        Err(e) => return r.error("fixture", &e),
    };
    let eta = match TestField::from_reference(&mm, projector_input(horizon)) {
        Ok(f) => f,
        Err(e) => return r.error("input", &e),
    };
    let scale = eta.w12_norms(&mm).into_iter().fold(0.0, f64::max);
    let mut errors = Vec::new();
    for &n in &opts.projector_levels {
        match project_solenoidal_testfield(&mm, &eta, &ProjectorConfig::with_n(n)) {
            Ok((out, rep)) => {
                r.at_most(format!("n{n}_divergence"), rep.max_divergence, 1e-10);
                r.push(
                    format!("n{n}_support_distance"),
                    rep.support_distance,
                    format!(">= {:.4}", rep.support_bound()),
                    rep.support_ok(),
                );
                let e = out.w12_distance(&mm, &eta).into_iter().fold(0.0, f64::max) / scale;
                r.constants.insert(format!("n{n}_relative_w12_error"), e);
                r.constants.insert(format!("n{n}_time_derivative_norm"), rep.time_derivative_norm);
                r.constants.insert(format!("n{n}_correction_norm"), rep.correction_norm);
                errors.push(e);
            }
            Err(e) => r.error(format!("n{n}"), &e),
        }
    }
    for (i, w) in errors.windows(2).enumerate() {
        r.within(format!("halving_ratio_{i}"), w[0] / w[1], 1.4, 2.6);
    }
}

//! Command-line front end: argument parsing, subcommands and exports.

use crate::analysis::{run_suite, Suite, VerifyOptions};
use crate::config::{OutputDir, RunConfig};
use crate::discretization::export::{boundary_csv, fmt_f64, VtkLayer};
use crate::discretization::MovingMesh;
use crate::error::{exit_code, Error, Result};
use crate::functionals::{evaluate, FunctionalSpec, FunctionalValue};
use crate::geometry::{DomainSpec, VelocityFieldSpec};
use crate::optimizer::{minimize, Decoded, FlowRun, Objective, OptimizerState};
use crate::rheology::conjugate;
use crate::solver::{energy_bound, energy_check, BoundInputs, EnergyBound, EnergyCheck};
use crate::{Point, SCHEMA_VERSION};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

const AFTER_HELP: &str = "\
Configuration files are JSON with \"schema_version\": 1.

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 I/O error,
5 verification failure, 6 optimizer failure, 64 usage error.

Environment: HEMOSHAPE_OUT_DIR overrides the output directory,
HEMOSHAPE_THREADS the worker thread count.";

#[derive(Debug, Parser)]
#[command(name = "hemoshape", version, about = "Shear-thinning flow in moving domains (config schema v1)", after_help = AFTER_HELP)]
pub struct Cli {
    /// Worker threads; results are bit-identical for every count.
    #[arg(long, global = true, env = "HEMOSHAPE_THREADS")]
    pub threads: Option<usize>,
    /// Output directory, overriding the config's out_dir.
    #[arg(long, global = true, env = "HEMOSHAPE_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Run configuration (JSON, schema v1).
    pub config: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forward solve on the configured domain with field, ledger and summary exports.
    Simulate(ConfigArg),
    /// Minimize the configured objective over admissible shapes.
    Optimize {
        #[command(flatten)]
        config: ConfigArg,
        /// Continue from optimizer_state.json in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Forward solve and evaluate the hemolysis functional.
    Hemolysis(ConfigArg),
    /// Run verification suites and write a JSON report.
    Verify {
        #[arg(long, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-solve the best design of a finished optimization and export its fields.
    Export {
        #[command(flatten)]
        config: ConfigArg,
        /// Optimizer state to read; defaults to optimizer_state.json in the output directory.
        #[arg(long)]
        state: Option<PathBuf>,
    },
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit_code::USAGE } else { exit_code::SUCCESS };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out_dir = |cfg: &RunConfig| cli.out_dir.clone().unwrap_or_else(|| cfg.out_dir.clone());
    match &cli.command {
        Command::Simulate(a) => {
            let cfg = RunConfig::load(&a.config)?;
            simulate(&cfg, &out_dir(&cfg))?;
        }
        Command::Optimize { config, resume } => {
            let cfg = RunConfig::load(&config.config)?;
            optimize(&cfg, &out_dir(&cfg), *resume)?;
        }
        Command::Hemolysis(a) => {
            let cfg = RunConfig::load(&a.config)?;
            hemolysis(&cfg, &out_dir(&cfg))?;
        }
        Command::Verify { suite, seed } => {
            let dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
            return verify(*suite, *seed, &dir);
        }
        Command::Export { config, state } => {
            let cfg = RunConfig::load(&config.config)?;
            let dir = out_dir(&cfg);
            let state = state.clone().unwrap_or_else(|| dir.join(STATE_FILE));
            export(&cfg, &dir, &state)?;
        }
    }
    Ok(exit_code::SUCCESS)
}

pub const STATE_FILE: &str = "optimizer_state.json";

#[derive(Debug, Serialize)]
struct MemberSummary {
    index: usize,
    inv_m: f64,
    initial_w_norm: f64,
    max_picard_iterations: usize,
    energy: EnergyCheck,
    max_route_gap: f64,
    max_divergence: f64,
}

#[derive(Debug, Serialize)]
struct SimulationSummary {
    schema_version: u32,
    area: f64,
    vertices: usize,
    triangles: usize,
    layers: usize,
    min_quality: f64,
    bound: EnergyBound,
    functional: FunctionalValue,
    members: Vec<MemberSummary>,
    failures: Vec<(usize, String)>,
}

fn certify(cfg: &RunConfig) -> Result<(DomainSpec, VelocityFieldSpec)> {
    Ok((cfg.domain_spec()?, cfg.velocity_spec()?))
}

fn solve(cfg: &RunConfig, domain: &DomainSpec, velocity: &VelocityFieldSpec) -> Result<FlowRun> {
    let setup = cfg.flow_setup()?;
    setup.run(domain, velocity, setup.ensemble.len())
}

/// Chains the reference boundary edges into one closed loop of vertex indices.
fn boundary_loop(mm: &MovingMesh) -> Vec<usize> {
    let edges = &mm.reference.boundary_edges;
    let mut next = vec![usize::MAX; mm.reference.n_vertices()];
    for &[a, b] in edges {
        next[a] = b;
    }
    let Some(&[start, _]) = edges.first() else {
        return Vec::new();
    };
    let mut out = vec![start];
    let mut v = next[start];
    while v != start && v != usize::MAX && out.len() <= edges.len() {
        out.push(v);
        v = next[v];
    }
    out
}

fn boundary_layers(mm: &MovingMesh) -> (Vec<f64>, Vec<Vec<Point>>) {
    let ring = boundary_loop(mm);
    let times = (0..mm.layers()).map(|l| mm.grid.time(l)).collect();
    let layers = (0..mm.layers())
        .map(|l| {
            let v = mm.layer_vertices(l);
            ring.iter().map(|&i| v[i]).collect()
        })
        .collect();
    (times, layers)
}

/// Writes fields, ledgers, boundaries and the summary of one flow run.
fn write_run(out: &mut OutputDir, cfg: &RunConfig, domain: &DomainSpec, velocity: &VelocityFieldSpec, run: &FlowRun) -> Result<()> {
    let mm = &run.mesh;
    let solutions: Vec<_> = run.outcome.solutions().collect();
    let best = solutions[run.value.argmin];
    for l in 0..mm.layers() {
        let nodes = mm.layer_nodes(l);
        let vtk = VtkLayer {
            title: format!("hemoshape layer {l} t = {}", fmt_f64(mm.grid.time(l))),
            layout: &mm.layout,
            nodes: &nodes,
            velocity: &best.state.velocity[l],
            pressure: &best.state.pressure[l],
            scalars: Vec::new(),
        };
        out.write(&format!("fields/layer_{l:04}.vtk"), vtk.render().as_bytes())?;
    }
    let (times, layers) = boundary_layers(mm);
    out.write("boundary.csv", boundary_csv(&times, &layers).as_bytes())?;

    let q = cfg.rheology.q;
    let mut members = Vec::new();
    let mut bound = None;
    for (&(index, _), sol) in run.outcome.members.iter().zip(&solutions) {
        out.write(&format!("energy_member{index}.csv"), sol.ledger.to_csv().as_bytes())?;
        let force = cfg.solver.force.norm_power(conjugate(q), cfg.hold_all.cylinder_volume());
        let b = energy_bound(&BoundInputs::for_hold_all(&cfg.hold_all, q, velocity.c_v(), sol.initial_w_norm, force));
        members.push(MemberSummary {
            index,
            inv_m: sol.inv_m,
            initial_w_norm: sol.initial_w_norm,
            max_picard_iterations: sol.picard.iter().map(|p| p.increments.len()).max().unwrap_or(0),
            energy: energy_check(&sol.ledger, b.c_bound),
            max_route_gap: sol.ledger.max_route_gap(),
            max_divergence: sol.ledger.max_divergence(),
        });
        bound.get_or_insert(b);
    }
    out.write_json(
        "summary.json",
        &SimulationSummary {
            schema_version: SCHEMA_VERSION,
            area: domain.area(),
            vertices: mm.reference.n_vertices(),
            triangles: mm.reference.n_triangles(),
            layers: mm.layers(),
            min_quality: mm.min_quality.iter().copied().fold(f64::INFINITY, f64::min),
            bound: bound.expect("at least one member"),
            functional: run.value.clone(),
            members,
            failures: run.outcome.failures.clone(),
        },
    )
}

pub fn simulate(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let mut out = OutputDir::create(dir)?;
    let (domain, velocity) = certify(cfg)?;
    out.stage("certify");
    let run = solve(cfg, &domain, &velocity)?;
    out.stage("solve");
    info!("functional value {:e}", run.value.value);
    write_run(&mut out, cfg, &domain, &velocity, &run)?;
    out.stage("export");
    out.finish("simulate", Some(cfg))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct HemolysisReport {
    schema_version: u32,
    q_conjugate: f64,
    r: f64,
    r_upper: f64,
    value: FunctionalValue,
}

pub fn hemolysis(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let hp = cfg
        .hemolysis
        .clone()
        .ok_or_else(|| Error::Config("the hemolysis command needs a hemolysis section".into()))?;
    let window = hp.validate(cfg.rheology.q)?;
    let mut out = OutputDir::create(dir)?;
    let (domain, velocity) = certify(cfg)?;
    let run = solve(cfg, &domain, &velocity)?;
    out.stage("solve");
    let states: Vec<_> = run.outcome.solutions().map(|s| s.state.clone()).collect();
    let value = evaluate(&FunctionalSpec::hemolysis(hp.clone()), &run.mesh, &states, &cfg.rheology, Some(&velocity))?;
    let mut csv = String::from("layer,t,integral\n");
    for (l, v) in value.breakdown.iter().enumerate() {
        let _ = writeln!(csv, "{l},{},{}", fmt_f64(run.mesh.grid.time(l)), fmt_f64(*v));
    }
    out.write("hemolysis_layers.csv", csv.as_bytes())?;
    out.write_json(
        "hemolysis.json",
        &HemolysisReport {
            schema_version: SCHEMA_VERSION,
            q_conjugate: window.q_conjugate,
            r: hp.r,
            r_upper: window.r_upper,
            value,
        },
    )?;
    out.stage("evaluate");
    out.finish("hemolysis", Some(cfg))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct OptimizationSummary {
    schema_version: u32,
    best_value: f64,
    best_params: Option<Vec<f64>>,
    found_at: Option<usize>,
    evaluations: usize,
    improvements: usize,
    feasible_evaluations: usize,
    monotone: bool,
}

pub fn optimize(cfg: &RunConfig, dir: &Path, resume: bool) -> Result<OptimizerState> {
    let previous = if resume {
        let path = dir.join(STATE_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("cannot resume from {}: {e}", path.display()))))?;
        Some(serde_json::from_str::<OptimizerState>(&text)?)
    } else {
        None
    };
    let mut out = OutputDir::create(dir)?;
    let space = cfg.param_space();
    let flow;
    let area;
    let objective: &dyn Objective = match cfg.area_objective() {
        Some(a) => {
            area = a;
            &area
        }
        None => {
            flow = cfg.flow_setup()?;
            &flow
        }
    };
    let state = minimize(&space, objective, &cfg.optimizer_config(), previous)?;
    out.stage("search");
    out.write("history.csv", state.history_csv().as_bytes())?;
    out.write_json(STATE_FILE, &state)?;
    if let Some(b) = &state.best {
        if let Decoded::Admissible { domain, .. } = space.decode(&b.params) {
            let poly = domain.polygon(cfg.optimizer.boundary_samples);
            let mut csv = String::from("vertex_index,x,y\n");
            for (i, p) in poly.vertices.iter().enumerate() {
                let _ = writeln!(csv, "{i},{},{}", fmt_f64(p[0]), fmt_f64(p[1]));
            }
            out.write("best_boundary.csv", csv.as_bytes())?;
        }
    }
    out.write_json(
        "summary.json",
        &OptimizationSummary {
            schema_version: SCHEMA_VERSION,
            best_value: state.best_value(),
            best_params: state.best.as_ref().map(|b| b.params.flat()),
            found_at: state.best.as_ref().map(|b| b.found_at),
            evaluations: state.evaluations,
            improvements: state.improvements,
            feasible_evaluations: state.history.iter().filter(|h| h.feasible).count(),
            monotone: state.is_monotone(),
        },
    )?;
    out.stage("export");
    out.finish("optimize", Some(cfg))?;
    Ok(state)
}

pub fn export(cfg: &RunConfig, dir: &Path, state_path: &Path) -> Result<()> {
    let state: OptimizerState = serde_json::from_str(&std::fs::read_to_string(state_path)?)?;
    let best = state
        .best
        .ok_or_else(|| Error::Optimizer(format!("{} holds no feasible point", state_path.display())))?;
    let Decoded::Admissible { domain, velocity } = cfg.param_space().decode(&best.params) else {
        return Err(Error::Optimizer("stored best point is not admissible under this config".into()));
    };
    let mut out = OutputDir::create(&dir.join("export"))?;
    let run = solve(cfg, &domain, &velocity)?;
    out.stage("solve");
    write_run(&mut out, cfg, &domain, &velocity, &run)?;
    out.stage("export");
    out.finish("export", Some(cfg))?;
    Ok(())
}

pub fn verify(suite: Suite, seed: u64, dir: &Path) -> Result<i32> {
    let mut out = OutputDir::create(dir)?;
    let report = run_suite(suite, &VerifyOptions { seed, ..Default::default() });
    for s in &report.suites {
        println!("{:<10} {}", s.suite, if s.pass { "pass" } else { "FAIL" });
        for c in s.checks.iter().filter(|c| !c.pass) {
            println!("  {} = {:e} ({})", c.name, c.value, c.rule);
        }
    }
    out.write_json("verify_report.json", &report)?;
    out.stage("verify");
    out.finish("verify", None)?;
    Ok(if report.pass { exit_code::SUCCESS } else { exit_code::VERIFICATION })
}

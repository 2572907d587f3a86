//! Versioned JSON run configuration, output bookkeeping and the run manifest.

use crate::discretization::MeshResolution;
use crate::error::{Error, Result};
use crate::functionals::{validate_spec, FunctionalKind, FunctionalSpec};
use crate::geometry::{DomainParams, DomainSpec, HoldAll, VelocityFieldSpec, VelocityParams};
use crate::optimizer::{AreaObjective, FlowSetup, OptimizerConfig, ParamSpace};
use crate::rheology::{HemolysisParams, RheologyParams};
use crate::solver::{BodyForce, InitialData, SolverConfig};
use crate::SCHEMA_VERSION;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub resolution: MeshResolution,
    /// Step of the flow-map ODE; a quarter of the solver step when absent.
    #[serde(default)]
    pub dt_ode: Option<f64>,
    #[serde(default = "default_quality_floor")]
    pub quality_floor: f64,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default)]
    pub force: BodyForce,
    /// Solver variants whose minimum defines the functional value.
    pub ensemble: Vec<SolverConfig>,
    /// Optimizer improvements per additional ensemble member.
    #[serde(default)]
    pub grow_every: Option<usize>,
}

fn default_quality_floor() -> f64 {
    0.05
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// The configured functional of the forward solution.
    #[default]
    Flow,
    /// |area(Ω) − target|^exponent; needs no flow solve.
    Area {
        target: f64,
        #[serde(default = "one")]
        exponent: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// Search settings; the random seed is the top-level `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub budget: usize,
    pub starts: usize,
    pub simplex_scale: f64,
    pub penalty: f64,
    pub xtol: f64,
    pub ftol: f64,
    pub restarts: bool,
    pub hausdorff_grid: usize,
    pub boundary_samples: usize,
    pub c1_grid: [usize; 3],
    /// Fourier modes of the radial function.
    pub modes: usize,
    pub optimize_velocity: bool,
    /// Box bounds of the parameter vector; derived from the domain when absent.
    pub bounds: Option<Vec<[f64; 2]>>,
    pub objective: ObjectiveKind,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        Self {
            budget: d.budget,
            starts: d.starts,
            simplex_scale: d.simplex_scale,
            penalty: d.penalty,
            xtol: d.xtol,
            ftol: d.ftol,
            restarts: d.restarts,
            hausdorff_grid: d.hausdorff_grid,
            boundary_samples: d.boundary_samples,
            c1_grid: d.c1_grid,
            modes: 2,
            optimize_velocity: false,
            bounds: None,
            objective: ObjectiveKind::Flow,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub hold_all: HoldAll,
    pub domain: DomainParams,
    pub velocity: VelocityParams,
    pub rheology: RheologyParams,
    /// Hemolysis constants; used by the functional when it does not carry its own.
    #[serde(default)]
    pub hemolysis: Option<HemolysisParams>,
    pub solver: SolverSection,
    pub functional: FunctionalSpec,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the normalized serialization, hex encoded.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }

    /// Every cross-section rule, including the hemolysis exponent window.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.hold_all.validate()?;
        self.rheology.validate()?;
        if let Some(h) = &self.hemolysis {
            h.validate(self.rheology.q)?;
        }
        validate_spec(&self.functional_spec(), &self.rheology)?;
        if self.solver.quality_floor <= 0.0 || self.solver.quality_floor >= 1.0 {
            return Err(Error::Config(format!(
                "quality_floor must lie in (0, 1), got {}",
                self.solver.quality_floor
            )));
        }
        self.flow_setup()?.validate()?;
        self.optimizer_config().validate()?;
        self.param_space().validate()?;
        Ok(())
    }

    /// The functional with the top-level hemolysis constants filled in.
    pub fn functional_spec(&self) -> FunctionalSpec {
        let mut spec = self.functional.clone();
        if spec.kind == FunctionalKind::HemolysisR && spec.hemolysis.is_none() {
            spec.hemolysis = self.hemolysis.clone();
        }
        spec
    }

    pub fn domain_spec(&self) -> Result<DomainSpec> {
        DomainSpec::certify(self.domain.clone(), &self.hold_all)
    }

    pub fn velocity_spec(&self) -> Result<VelocityFieldSpec> {
        VelocityFieldSpec::certify(self.velocity.clone(), &self.hold_all)
    }

    pub fn flow_setup(&self) -> Result<FlowSetup> {
        let dt = self
            .solver
            .ensemble
            .first()
            .ok_or_else(|| Error::Config("solver ensemble is empty".into()))?
            .dt;
        Ok(FlowSetup {
            hold_all: self.hold_all.clone(),
            rheology: self.rheology.clone(),
            functional: self.functional_spec(),
            resolution: self.solver.resolution,
            dt_ode: self.solver.dt_ode.unwrap_or(dt / 4.0),
            quality_floor: self.solver.quality_floor,
            initial: self.solver.initial.clone(),
            force: self.solver.force.clone(),
            ensemble: self.solver.ensemble.clone(),
            grow_every: self.solver.grow_every,
        })
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let o = &self.optimizer;
        OptimizerConfig {
            budget: o.budget,
            starts: o.starts,
            simplex_scale: o.simplex_scale,
            penalty: o.penalty,
            xtol: o.xtol,
            ftol: o.ftol,
            restarts: o.restarts,
            seed: self.seed,
            hausdorff_grid: o.hausdorff_grid,
            boundary_samples: o.boundary_samples,
            c1_grid: o.c1_grid,
        }
    }

    pub fn param_space(&self) -> ParamSpace {
        let mut space = ParamSpace::shapes(
            self.hold_all.clone(),
            self.domain.clone(),
            self.optimizer.modes,
            self.velocity.clone(),
        );
        if self.optimizer.optimize_velocity {
            space = space.with_velocity();
        }
        if let Some(b) = &self.optimizer.bounds {
            space.bounds = b.clone();
        }
        space
    }

    pub fn area_objective(&self) -> Option<AreaObjective> {
        match self.optimizer.objective {
            ObjectiveKind::Area { target, exponent } => Some(AreaObjective { target, exponent }),
            ObjectiveKind::Flow => None,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let mut f = std::fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub config_sha256: Option<String>,
    pub crate_version: String,
    pub threads: usize,
    pub wall_seconds: f64,
    pub timings: Vec<StageTiming>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(dir.join(Self::FILE_NAME))?)?)
    }
}

/// Output directory that records every file written through it.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileEntry>,
    timings: Vec<StageTiming>,
    started: Instant,
    stage_started: Instant,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        let now = Instant::now();
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
            timings: Vec::new(),
            started: now,
            stage_started: now,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        write_atomic(&path, bytes)?;
        let entry = FileEntry {
            path: rel.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        };
        match self.files.iter_mut().find(|f| f.path == rel) {
            Some(f) => *f = entry,
            None => self.files.push(entry),
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// Closes the current stage and starts the next one.
    pub fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.timings.push(StageTiming {
            stage: name.to_string(),
            seconds: (now - self.stage_started).as_secs_f64(),
        });
        self.stage_started = now;
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn finish(self, command: &str, config: Option<&RunConfig>) -> Result<RunManifest> {
        let manifest = RunManifest {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config_sha256: config.map(RunConfig::hash),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            threads: rayon::current_num_threads(),
            wall_seconds: self.started.elapsed().as_secs_f64(),
            timings: self.timings,
            files: self.files,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        write_atomic(&self.root.join(RunManifest::FILE_NAME), text.as_bytes())?;
        Ok(manifest)
    }
}

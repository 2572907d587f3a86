//! C ABI over the hemoshape pipeline.
//!
//! Every function returns an [`HsStatus`]. On failure the message is kept per
//! thread and can be read with [`hs_last_error`] until the next failing call
//! on the same thread. Handles are opaque and must be released with their
//! `_free` function.

use hemoshape::analysis::{run_suite, Suite, VerifyOptions};
use hemoshape::config::{OutputDir, RunConfig};
use hemoshape::error::Error;
use hemoshape::optimizer::FlowRun;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    Config = 2,
    Solver = 3,
    Io = 4,
    Verification = 5,
    Optimizer = 6,
    NullArgument = 10,
    InvalidString = 11,
    Panic = 12,
    BufferTooSmall = 13,
}

impl From<&Error> for HsStatus {
    fn from(e: &Error) -> Self {
        match e.exit_code() {
            2 => HsStatus::Config,
            4 => HsStatus::Io,
            5 => HsStatus::Verification,
            6 => HsStatus::Optimizer,
            _ => HsStatus::Solver,
        }
    }
}

/// A validated run configuration.
pub struct HsConfig {
    inner: RunConfig,
}

/// One forward solve: moving mesh, ensemble states and functional value.
pub struct HsRun {
    inner: FlowRun,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn fail(status: HsStatus, msg: impl Into<String>) -> HsStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), HsStatus>) -> HsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HsStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(HsStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn check(r: hemoshape::error::Result<()>) -> Result<(), HsStatus> {
    r.map_err(|e| fail(HsStatus::from(&e), e.to_string()))
}

unsafe fn string_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, HsStatus> {
    if p.is_null() {
        return Err(fail(HsStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(HsStatus::InvalidString, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, HsStatus> {
    p.as_ref().ok_or_else(|| fail(HsStatus::NullArgument, format!("{name} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, HsStatus> {
    p.as_mut().ok_or_else(|| fail(HsStatus::NullArgument, format!("{name} is null")))
}

fn validated(cfg: hemoshape::error::Result<RunConfig>) -> Result<Box<HsConfig>, HsStatus> {
    let cfg = cfg.map_err(|e| fail(HsStatus::from(&e), e.to_string()))?;
    check(cfg.validate())?;
    Ok(Box::new(HsConfig { inner: cfg }))
}

fn out_dir(cfg: &RunConfig, dir: *const c_char) -> Result<PathBuf, HsStatus> {
    if dir.is_null() {
        Ok(cfg.out_dir.clone())
    } else {
        Ok(PathBuf::from(unsafe { string_arg(dir, "out_dir") }?))
    }
}

/// Message of the last failing call on this thread, or an empty string.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Config schema version understood by this build.
#[no_mangle]
pub extern "C" fn hs_schema_version() -> u32 {
    hemoshape::SCHEMA_VERSION
}

/// Loads and validates a JSON config file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_config_load(path: *const c_char, out: *mut *mut HsConfig) -> HsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        let path = string_arg(path, "path")?;
        *out = Box::into_raw(validated(RunConfig::load(Path::new(path)))?);
        Ok(())
    })
}

/// Parses and validates a JSON config held in memory.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_config_from_json(json: *const c_char, out: *mut *mut HsConfig) -> HsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        let json = string_arg(json, "json")?;
        *out = Box::into_raw(validated(RunConfig::from_json(json))?);
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from `hs_config_load` or `hs_config_from_json`, or be null.
#[no_mangle]
pub unsafe extern "C" fn hs_config_free(cfg: *mut HsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Writes the config's SHA-256 as 64 hex characters plus a NUL into `buf`,
/// which must hold at least 65 bytes.
///
/// # Safety
/// `cfg` must be a live handle and `buf` writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn hs_config_hash(cfg: *const HsConfig, buf: *mut c_char, len: usize) -> HsStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        if buf.is_null() {
            return Err(fail(HsStatus::NullArgument, "buf is null"));
        }
        let hash = cfg.inner.hash();
        if len <= hash.len() {
            return Err(fail(HsStatus::BufferTooSmall, format!("buffer of {len} bytes cannot hold {} + 1", hash.len())));
        }
        std::ptr::copy_nonoverlapping(hash.as_ptr().cast(), buf, hash.len());
        *buf.add(hash.len()) = 0;
        Ok(())
    })
}

/// Runs the forward pipeline on the config's own domain and velocity.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_solve(cfg: *const HsConfig, out: *mut *mut HsRun) -> HsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        let cfg = &ref_arg(cfg, "cfg")?.inner;
        let run = (|| {
            let (domain, velocity) = (cfg.domain_spec()?, cfg.velocity_spec()?);
            let setup = cfg.flow_setup()?;
            setup.run(&domain, &velocity, setup.ensemble.len())
        })()
        .map_err(|e| fail(HsStatus::from(&e), e.to_string()))?;
        *out = Box::into_raw(Box::new(HsRun { inner: run }));
        Ok(())
    })
}

/// # Safety
/// `run` must come from `hs_solve`, or be null.
#[no_mangle]
pub unsafe extern "C" fn hs_run_free(run: *mut HsRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Functional value (minimum over the ensemble).
///
/// # Safety
/// `run` must be a live handle and `value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_run_functional(run: *const HsRun, value: *mut f64) -> HsStatus {
    guard(|| {
        *out_arg(value, "value")? = ref_arg(run, "run")?.inner.value.value;
        Ok(())
    })
}

/// Number of time layers, including t = 0.
///
/// # Safety
/// `run` must be a live handle and `layers` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_run_layers(run: *const HsRun, layers: *mut usize) -> HsStatus {
    guard(|| {
        *out_arg(layers, "layers")? = ref_arg(run, "run")?.inner.mesh.layers();
        Ok(())
    })
}

/// Largest relative energy-identity residual over every solved member.
///
/// # Safety
/// `run` must be a live handle and `residual` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_run_energy_residual(run: *const HsRun, residual: *mut f64) -> HsStatus {
    guard(|| {
        let run = &ref_arg(run, "run")?.inner;
        *out_arg(residual, "residual")? = run
            .outcome
            .solutions()
            .map(|s| s.ledger.max_relative_residual())
            .fold(0.0, f64::max);
        Ok(())
    })
}

/// Runs `simulate` and writes its exports. A null `out_dir` uses the config's.
///
/// # Safety
/// `cfg` must be a live handle; `out_dir` null or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hs_simulate(cfg: *const HsConfig, out_dir: *const c_char) -> HsStatus {
    guard(|| {
        let cfg = &ref_arg(cfg, "cfg")?.inner;
        check(hemoshape::cli::simulate(cfg, &self::out_dir(cfg, out_dir)?))
    })
}

/// Runs the optimizer, optionally resuming from the state in `out_dir`, and
/// stores the best value found.
///
/// # Safety
/// `cfg` must be a live handle, `out_dir` null or a NUL-terminated string,
/// and `best` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_optimize(cfg: *const HsConfig, out_dir: *const c_char, resume: bool, best: *mut f64) -> HsStatus {
    guard(|| {
        let best = out_arg(best, "best")?;
        let cfg = &ref_arg(cfg, "cfg")?.inner;
        let state = hemoshape::cli::optimize(cfg, &self::out_dir(cfg, out_dir)?, resume)
            .map_err(|e| fail(HsStatus::from(&e), e.to_string()))?;
        *best = state.best_value();
        Ok(())
    })
}

/// Runs a verification suite by name and writes `verify_report.json` into
/// `out_dir`. A failing suite returns `Verification`.
///
/// # Safety
/// `suite` and `out_dir` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn hs_verify(suite: *const c_char, seed: u64, out_dir: *const c_char) -> HsStatus {
    guard(|| {
        let suite: Suite = string_arg(suite, "suite")?
            .parse()
            .map_err(|e: String| fail(HsStatus::Config, e))?;
        let dir = string_arg(out_dir, "out_dir")?;
        let report = run_suite(suite, &VerifyOptions { seed, ..Default::default() });
        check((|| {
            let mut out = OutputDir::create(Path::new(dir))?;
            out.write_json("verify_report.json", &report)?;
            out.stage("verify");
            out.finish("verify", None).map(|_| ())
        })())?;
        if report.pass {
            Ok(())
        } else {
            let failing: Vec<&str> = report.suites.iter().filter(|s| !s.pass).map(|s| s.suite.as_str()).collect();
            Err(fail(HsStatus::Verification, format!("failing suites: {}", failing.join(", "))))
        }
    })
}

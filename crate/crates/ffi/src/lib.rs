//! C ABI over the cyclone-tipping library.
//!
//! Every function returns a [`CtStatus`]; on failure a message is kept per thread and can be
//! read with [`ct_last_error_message`]. Objects are opaque handles released by their `_free`
//! function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cyclone_tipping::action::{solve_mpp, MamOptions, PathGrid, TransitionPath, WeightMatrix};
use cyclone_tipping::commands::{self, Command};
use cyclone_tipping::config::RunConfig;
use cyclone_tipping::model::{fixed_points, vector_field, FixedPointStatus, ModelParams, State};
use cyclone_tipping::output::{to_json, Envelope, PRODUCER, SCHEMA_VERSION};
use cyclone_tipping::rate::{critical_rate, simulate_ramp, storm_minus, RampRunOptions, RampSpec, TipVerdict};
use cyclone_tipping::stochastic::{run_ensemble, storm_state, EnsembleOptions, NoiseSpec};
use cyclone_tipping::Error;

/// Result codes. `InvalidArgument`, `NumericalFailure` and `NotConverged` share their values
/// with the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericalFailure = 3,
    NotConverged = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtVerdict {
    Tracked = 0,
    TippedToO = 1,
    Undetermined = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtBasin {
    O = 0,
    S = 1,
}

/// Equilibria in the order O, U, S; `count` is 1 when only O exists.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CtFixedPoints {
    pub count: u32,
    pub v: [f64; 3],
    pub m: [f64; 3],
}

/// First-transition statistics of an ensemble. Times are NaN when nothing tipped.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CtEnsembleStats {
    pub n_realizations: u64,
    pub n_tipped: u64,
    pub tip_fraction: f64,
    pub tip_time_mean: f64,
    pub tip_time_median: f64,
}

/// Opaque model parameters.
pub struct CtModel {
    params: ModelParams,
}

/// Opaque converged transition path.
pub struct CtPath {
    path: TransitionPath,
    iterations: u64,
}

/// Opaque UTF-8 text buffer.
pub struct CtText {
    text: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CtStatus {
    match e.exit_code() {
        2 => CtStatus::InvalidArgument,
        4 => CtStatus::NotConverged,
        _ => CtStatus::NumericalFailure,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (CtStatus, String)>) -> CtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CtStatus::Ok
        }
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            CtStatus::Panic
        }
    }
}

fn lib(e: Error) -> (CtStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (CtStatus, String) {
    (CtStatus::NullPointer, format!("{name} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, (CtStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (CtStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ct_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the next call on
/// this thread.
#[no_mangle]
pub extern "C" fn ct_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a model with validated parameters.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ct_model_new(gamma: f64, c: f64, out: *mut *mut CtModel) -> CtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params = ModelParams::new(gamma, c).map_err(lib)?;
        *out = Box::into_raw(Box::new(CtModel { params }));
        Ok(())
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must come from [`ct_model_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ct_model_free(model: *mut CtModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Drift (dv/dτ, dm/dτ) at (v, m).
///
/// # Safety
/// `model` must be a live handle; `out_dv` and `out_dm` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ct_model_vector_field(
    model: *const CtModel,
    v: f64,
    m: f64,
    out_dv: *mut f64,
    out_dm: *mut f64,
) -> CtStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if out_dv.is_null() || out_dm.is_null() {
            return Err(null("output"));
        }
        let f = vector_field(State::new(v, m), &model.params);
        *out_dv = f.v;
        *out_dm = f.m;
        Ok(())
    })
}

/// Equilibria of the model.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ct_model_fixed_points(model: *const CtModel, out: *mut CtFixedPoints) -> CtStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let fp = fixed_points(&model.params).map_err(lib)?;
        let mut r = CtFixedPoints::default();
        let states = match fp.status {
            FixedPointStatus::ThreeEquilibria => fp.all().iter().map(|e| e.state).collect(),
            _ => vec![fp.origin.state],
        };
        for (k, s) in states.iter().enumerate() {
            r.v[k] = s.v;
            r.m[k] = s.m;
        }
        r.count = states.len() as u32;
        *out = r;
        Ok(())
    })
}

/// Deterministic ramped run from S⁻ with the default ramp at rate `r`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ct_rate_tip(r: f64, gamma: f64, out: *mut CtVerdict) -> CtStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let spec = RampSpec::default().with_rate(r);
        let x0 = storm_minus(&spec, gamma).map_err(lib)?;
        let run = simulate_ramp(x0, &spec, gamma, &RampRunOptions::default()).map_err(lib)?;
        *out = match run.verdict {
            TipVerdict::Tracked => CtVerdict::Tracked,
            TipVerdict::TippedToO => CtVerdict::TippedToO,
            TipVerdict::Undetermined => CtVerdict::Undetermined,
        };
        Ok(())
    })
}

/// Bisection for the critical ramp rate of the default ramp.
///
/// # Safety
/// `out_lo` and `out_hi` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ct_critical_rate(
    gamma: f64,
    r_lo: f64,
    r_hi: f64,
    tol: f64,
    out_lo: *mut f64,
    out_hi: *mut f64,
) -> CtStatus {
    guard(|| {
        if out_lo.is_null() || out_hi.is_null() {
            return Err(null("output"));
        }
        let cr = critical_rate(&RampSpec::default(), gamma, r_lo, r_hi, tol, &RampRunOptions::default()).map_err(lib)?;
        *out_lo = cr.r_lo;
        *out_hi = cr.r_hi;
        Ok(())
    })
}

/// Euler-Maruyama ensemble from O or S with equal noise on both components.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ct_ensemble_run(
    model: *const CtModel,
    start: CtBasin,
    sigma: f64,
    dt: f64,
    tau_f: f64,
    seed: u64,
    count: u64,
    out: *mut CtEnsembleStats,
) -> CtStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let x0 = match start {
            CtBasin::O => State::ORIGIN,
            CtBasin::S => storm_state(&model.params).map_err(lib)?,
        };
        let n = NoiseSpec { sigma1: sigma, sigma2: sigma, seed, dt, tau_f, store_every: 1000 };
        let e = run_ensemble(x0, &model.params, &n, count as usize, &EnsembleOptions::default()).map_err(lib)?;
        *out = CtEnsembleStats {
            n_realizations: e.stats.n_realizations as u64,
            n_tipped: e.stats.n_tipped as u64,
            tip_fraction: e.stats.tip_fraction,
            tip_time_mean: e.stats.tip_time_mean.unwrap_or(f64::NAN),
            tip_time_median: e.stats.tip_time_median.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Most probable O to S path on `[0, tau_f]` with `nodes` grid points.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ct_mpp_solve(
    model: *const CtModel,
    sigma1: f64,
    sigma2: f64,
    tau_f: f64,
    nodes: u64,
    out: *mut *mut CtPath,
) -> CtStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let w = WeightMatrix::new(sigma1, sigma2).map_err(lib)?;
        let grid = PathGrid { tau_f, nodes: nodes as usize };
        let sol = solve_mpp(&model.params, &w, &grid, &MamOptions::default(), false).map_err(lib)?;
        *out = Box::into_raw(Box::new(CtPath { path: sol.path, iterations: sol.iterations as u64 }));
        Ok(())
    })
}

/// Number of nodes of a path, or 0 for null.
///
/// # Safety
/// `path` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ct_path_len(path: *const CtPath) -> u64 {
    path.as_ref().map_or(0, |p| p.path.len() as u64)
}

/// Discrete action of the path, or NaN for null.
///
/// # Safety
/// `path` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ct_path_action(path: *const CtPath) -> f64 {
    path.as_ref().map_or(f64::NAN, |p| p.path.action)
}

/// Gradient-flow iterations used, or 0 for null.
///
/// # Safety
/// `path` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ct_path_iterations(path: *const CtPath) -> u64 {
    path.as_ref().map_or(0, |p| p.iterations)
}

/// Copies τ, v and m into caller buffers of length `len`, which must be at least the path length.
///
/// # Safety
/// `path` must be a live handle; each buffer must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ct_path_copy(
    path: *const CtPath,
    tau: *mut f64,
    v: *mut f64,
    m: *mut f64,
    len: u64,
) -> CtStatus {
    guard(|| {
        let p = path.as_ref().ok_or_else(|| null("path"))?;
        if tau.is_null() || v.is_null() || m.is_null() {
            return Err(null("buffer"));
        }
        let n = p.path.len();
        if (len as usize) < n {
            return Err((CtStatus::BufferTooSmall, format!("need {n} entries, got {len}")));
        }
        for (i, x) in p.path.psi.iter().enumerate() {
            *tau.add(i) = p.path.tau(i);
            *v.add(i) = x.v;
            *m.add(i) = x.m;
        }
        Ok(())
    })
}

/// Releases a path; null is ignored.
///
/// # Safety
/// `path` must come from [`ct_mpp_solve`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ct_path_free(path: *mut CtPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Runs a command by its command-line name with a TOML configuration (null or empty for
/// defaults) and returns the JSON result envelope.
///
/// # Safety
/// `command` must be a NUL-terminated string; `config_toml` null or NUL-terminated; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ct_run_command(
    command: *const c_char,
    config_toml: *const c_char,
    out: *mut *mut CtText,
) -> CtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let name = str_arg(command, "command")?;
        let cmd = Command::from_name(name).ok_or_else(|| (CtStatus::InvalidArgument, format!("unknown command {name}")))?;
        let cfg = if config_toml.is_null() {
            RunConfig::default()
        } else {
            RunConfig::from_toml(str_arg(config_toml, "config_toml")?).map_err(lib)?
        };
        let res = commands::run(cmd, &cfg).map_err(lib)?;
        let env = Envelope {
            schema_version: SCHEMA_VERSION,
            command: cmd.name(),
            produced_by: PRODUCER,
            config: &cfg,
            tables: res.tables.iter().map(|t| t.file_name.as_str()).collect(),
            payload: &res.payload,
        };
        let json = to_json(&env).map_err(lib)?;
        let text = CString::new(json).map_err(|e| (CtStatus::NumericalFailure, e.to_string()))?;
        *out = Box::into_raw(Box::new(CtText { text }));
        Ok(())
    })
}

/// NUL-terminated contents of a text buffer, or null for null. Valid until the buffer is freed.
///
/// # Safety
/// `text` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ct_text_data(text: *const CtText) -> *const c_char {
    text.as_ref().map_or(ptr::null(), |t| t.text.as_ptr())
}

/// Releases a text buffer; null is ignored.
///
/// # Safety
/// `text` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ct_text_free(text: *mut CtText) {
    if !text.is_null() {
        drop(Box::from_raw(text));
    }
}

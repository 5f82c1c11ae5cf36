//! C ABI over the safety filters.
//!
//! Every function returns an [`EcbfStatus`]; on failure a message is kept
//! per thread and can be copied out with [`ecbf_last_error`]. Handles are
//! opaque, created by a `*_new`/`*_load` call and released with the
//! matching `*_free`. Panics never cross the boundary, they surface as
//! `ECBF_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use nalgebra::DVector;

use extent_cbf::qp::{solve_with, HalfspaceQP, LinearConstraint, QPMethod, QPOptions, QPStatus};
use extent_cbf::safety_filters::FilterStatus;
use extent_cbf::sim::{run_scenario, Scenario, ScenarioConfig};
use extent_cbf::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EcbfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Config = 4,
    Parse = 5,
    Io = 6,
    /// The filter or QP has no feasible input; outputs hold a best effort.
    Infeasible = 7,
    /// The solver stopped without a certified answer.
    NotConverged = 8,
    Numerical = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EcbfQpMethod {
    Auto = 0,
    Dykstra = 1,
    ActiveSet = 2,
}

/// Scenario loaded from a configuration, with its filter and controller.
pub struct EcbfScenario {
    inner: Scenario,
}

/// Projection problem: minimise |u - k|^2 over rows `a.u >= b` and `|u| <= M`.
pub struct EcbfQp {
    target: Vec<f64>,
    rows: Vec<LinearConstraint>,
    radius: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct EcbfFilterInfo {
    /// The filter changed the nominal input.
    pub active: bool,
    pub solve_ms: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct EcbfRunSummary {
    pub steps: usize,
    pub min_boundary_h: f64,
    pub min_center_h: f64,
    pub active_steps: usize,
    /// Steps that ended the run early, zero or one.
    pub halts: usize,
    pub solve_ms_median: f64,
    pub solve_ms_max: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: EcbfStatus, msg: impl Into<String>) -> EcbfStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> EcbfStatus {
    let status = match &e {
        Error::DimensionMismatch { .. } => EcbfStatus::DimensionMismatch,
        Error::Config(_) => EcbfStatus::Config,
        Error::Parse(_) => EcbfStatus::Parse,
        Error::Io { .. } => EcbfStatus::Io,
        Error::NonFinite(_) | Error::Geometry(_) => EcbfStatus::Numerical,
        Error::Contract(_) | Error::Unsupported(_) => EcbfStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> EcbfStatus) -> EcbfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(EcbfStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn slice<'a>(p: *const f64, n: usize) -> Option<&'a [f64]> {
    if p.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(p, n))
    }
}

unsafe fn slice_mut<'a>(p: *mut f64, n: usize) -> Option<&'a mut [f64]> {
    if p.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts_mut(p, n))
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, EcbfStatus> {
    if p.is_null() {
        return Err(fail(EcbfStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(EcbfStatus::InvalidArgument, "string is not UTF-8"))
}

fn check_len(what: &str, expected: usize, got: usize) -> Result<(), EcbfStatus> {
    if expected == got {
        Ok(())
    } else {
        Err(fail(
            EcbfStatus::DimensionMismatch,
            format!("{what}: expected length {expected}, got {got}"),
        ))
    }
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ecbf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated and
/// always NUL-terminated when `len > 0`). Returns the full message length
/// including the terminator, or 0 if there is no message.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ecbf_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

fn scenario_from(cfg: Result<ScenarioConfig, Error>, out: *mut *mut EcbfScenario) -> EcbfStatus {
    let built = cfg.and_then(|c| {
        c.validate()?;
        c.build()
    });
    match built {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(EcbfScenario { inner })) };
            EcbfStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Builds a scenario from TOML text. On success `*out` owns a new handle.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ecbf_scenario_from_toml(toml: *const c_char, out: *mut *mut EcbfScenario) -> EcbfStatus {
    guard(|| {
        if out.is_null() {
            return fail(EcbfStatus::NullPointer, "out is null");
        }
        let t = tri!(text(toml));
        scenario_from(ScenarioConfig::from_toml(t), out)
    })
}

/// Loads a scenario file. On success `*out` owns a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ecbf_scenario_load(path: *const c_char, out: *mut *mut EcbfScenario) -> EcbfStatus {
    guard(|| {
        if out.is_null() {
            return fail(EcbfStatus::NullPointer, "out is null");
        }
        let p = tri!(text(path));
        scenario_from(ScenarioConfig::load(Path::new(p)), out)
    })
}

/// Releases a scenario handle. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ecbf_scenario_free(s: *mut EcbfScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// State and input dimensions of the scenario's system.
///
/// # Safety
/// `s` must be a live handle; `n` and `m` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ecbf_scenario_dimensions(s: *const EcbfScenario, n: *mut usize, m: *mut usize) -> EcbfStatus {
    guard(|| {
        let (Some(s), false, false) = (s.as_ref(), n.is_null(), m.is_null()) else {
            return fail(EcbfStatus::NullPointer, "null argument");
        };
        *n = s.inner.system.state_dimension();
        *m = s.inner.system.input_dimension();
        EcbfStatus::Ok
    })
}

/// Writes the seeded start state into `x` (length `n`).
///
/// # Safety
/// `s` must be a live handle; `x` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ecbf_scenario_initial_state(s: *const EcbfScenario, x: *mut f64, n: usize) -> EcbfStatus {
    guard(|| {
        let (Some(s), Some(x)) = (s.as_ref(), slice_mut(x, n)) else {
            return fail(EcbfStatus::NullPointer, "null argument");
        };
        tri!(check_len("state", s.inner.initial_state.len(), n));
        x.copy_from_slice(&s.inner.initial_state);
        EcbfStatus::Ok
    })
}

/// Nominal controller input at `x`. Waypoint controllers advance their
/// target as a side effect, as in a simulation step.
///
/// # Safety
/// `s` must be a live handle; `x` holds `n` and `u` holds `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn ecbf_scenario_nominal(
    s: *mut EcbfScenario,
    x: *const f64,
    n: usize,
    u: *mut f64,
    m: usize,
) -> EcbfStatus {
    guard(|| {
        let (Some(s), Some(x), Some(u)) = (s.as_mut(), slice(x, n), slice_mut(u, m)) else {
            return fail(EcbfStatus::NullPointer, "null argument");
        };
        tri!(check_len("input", s.inner.system.input_dimension(), m));
        match s.inner.controller.input(&s.inner.system, x) {
            Ok(k) => {
                u.copy_from_slice(k.as_slice());
                EcbfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Filters the nominal input `k` at state `x` and writes the result to
/// `u`. Returns `ECBF_STATUS_INFEASIBLE` or `ECBF_STATUS_NOT_CONVERGED` when
/// the filter could not certify an input; `u` then holds the solver's last
/// iterate and must not be applied as safe. `info` may be null.
///
/// # Safety
/// `s` must be a live handle; `x` holds `n`, `k` and `u` hold `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn ecbf_scenario_filter(
    s: *const EcbfScenario,
    x: *const f64,
    n: usize,
    k: *const f64,
    u: *mut f64,
    m: usize,
    info: *mut EcbfFilterInfo,
) -> EcbfStatus {
    guard(|| {
        let (Some(s), Some(x), Some(k), Some(u)) = (s.as_ref(), slice(x, n), slice(k, m), slice_mut(u, m)) else {
            return fail(EcbfStatus::NullPointer, "null argument");
        };
        tri!(check_len("state", s.inner.system.state_dimension(), n));
        tri!(check_len("input", s.inner.system.input_dimension(), m));
        let out = match s.inner.filter.filter(x, &DVector::from_column_slice(k)) {
            Ok(o) => o,
            Err(e) => return from_error(e),
        };
        u.copy_from_slice(out.u.as_slice());
        if let Some(info) = info.as_mut() {
            *info = EcbfFilterInfo {
                active: out.active,
                solve_ms: out.solve_ms,
            };
        }
        match out.status {
            FilterStatus::Optimal => EcbfStatus::Ok,
            FilterStatus::Infeasible => fail(EcbfStatus::Infeasible, out.detail),
            FilterStatus::NotConverged => fail(EcbfStatus::NotConverged, out.detail),
        }
    })
}

/// One integrator step of length `dt` from `x` under input `u`.
///
/// # Safety
/// `s` must be a live handle; `x` and `x_next` hold `n`, `u` holds `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn ecbf_scenario_step(
    s: *const EcbfScenario,
    x: *const f64,
    n: usize,
    u: *const f64,
    m: usize,
    dt: f64,
    x_next: *mut f64,
) -> EcbfStatus {
    guard(|| {
        let (Some(s), Some(x), Some(u), Some(out)) = (s.as_ref(), slice(x, n), slice(u, m), slice_mut(x_next, n)) else {
            return fail(EcbfStatus::NullPointer, "null argument");
        };
        if !(dt > 0.0 && dt.is_finite()) {
            return fail(EcbfStatus::InvalidArgument, format!("dt must be positive, got {dt}"));
        }
        match s.inner.system.step(x, u, dt) {
            Ok(v) => {
                out.copy_from_slice(v.as_slice());
                EcbfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Runs the whole closed loop and fills `out`. A run that halts on an
/// uncertified step still returns `ECBF_STATUS_OK` with `halts == 1`.
///
/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ecbf_scenario_run(s: *mut EcbfScenario, out: *mut EcbfRunSummary) -> EcbfStatus {
    guard(|| {
        let (Some(s), Some(out)) = (s.as_mut(), out.as_mut()) else {
            return fail(EcbfStatus::NullPointer, "null argument");
        };
        match run_scenario(&mut s.inner) {
            Ok((_, r)) => {
                *out = EcbfRunSummary {
                    steps: r.steps,
                    min_boundary_h: r.min_boundary_h,
                    min_center_h: r.min_center_h,
                    active_steps: r.active_steps,
                    halts: r.infeasible_halts + r.not_converged_halts,
                    solve_ms_median: r.solve_ms.median,
                    solve_ms_max: r.solve_ms.max,
                };
                EcbfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// New projection problem with target `k` (length `m`) and ball radius `radius`.
///
/// # Safety
/// `k` holds `m` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ecbf_qp_new(k: *const f64, m: usize, radius: f64, out: *mut *mut EcbfQp) -> EcbfStatus {
    guard(|| {
        let (Some(k), false) = (slice(k, m), out.is_null()) else {
            return fail(EcbfStatus::NullPointer, "null argument");
        };
        if m == 0 {
            return fail(EcbfStatus::InvalidArgument, "input dimension must be positive");
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return fail(EcbfStatus::InvalidArgument, format!("ball radius must be positive, got {radius}"));
        }
        *out = Box::into_raw(Box::new(EcbfQp {
            target: k.to_vec(),
            rows: Vec::new(),
            radius,
        }));
        EcbfStatus::Ok
    })
}

/// Appends the row `a.u >= b`.
///
/// # Safety
/// `q` must be a live handle; `a` holds `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn ecbf_qp_add_row(q: *mut EcbfQp, a: *const f64, m: usize, b: f64) -> EcbfStatus {
    guard(|| {
        let (Some(q), Some(a)) = (q.as_mut(), slice(a, m)) else {
            return fail(EcbfStatus::NullPointer, "null argument");
        };
        tri!(check_len("row", q.target.len(), m));
        q.rows.push(LinearConstraint::from_slice(a, b));
        EcbfStatus::Ok
    })
}

/// Solves the projection. `tol <= 0` and `max_iter == 0` select defaults.
/// `objective` may be null.
///
/// # Safety
/// `q` must be a live handle; `u` holds `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn ecbf_qp_solve(
    q: *const EcbfQp,
    method: EcbfQpMethod,
    tol: f64,
    max_iter: usize,
    u: *mut f64,
    m: usize,
    objective: *mut f64,
) -> EcbfStatus {
    guard(|| {
        let (Some(q), Some(u)) = (q.as_ref(), slice_mut(u, m)) else {
            return fail(EcbfStatus::NullPointer, "null argument");
        };
        tri!(check_len("solution", q.target.len(), m));
        let problem = match HalfspaceQP::new(DVector::from_column_slice(&q.target), q.rows.clone(), q.radius) {
            Ok(p) => p,
            Err(e) => return from_error(e),
        };
        let mut opts = QPOptions {
            method: match method {
                EcbfQpMethod::Auto => QPMethod::Auto,
                EcbfQpMethod::Dykstra => QPMethod::Dykstra,
                EcbfQpMethod::ActiveSet => QPMethod::ActiveSet,
            },
            ..QPOptions::default()
        };
        if tol > 0.0 {
            opts.tol = tol;
        }
        if max_iter > 0 {
            opts.max_iter = max_iter;
        }
        let sol = match solve_with(&problem, &opts) {
            Ok(s) => s,
            Err(e) => return from_error(e),
        };
        u.copy_from_slice(sol.u.as_slice());
        if let Some(o) = objective.as_mut() {
            *o = sol.objective;
        }
        match sol.status {
            QPStatus::Optimal => EcbfStatus::Ok,
            QPStatus::Infeasible => fail(EcbfStatus::Infeasible, "no input satisfies every row inside the ball"),
            QPStatus::MaxIterations => fail(EcbfStatus::NotConverged, "iteration limit reached"),
        }
    })
}

/// Releases a QP handle. Null is ignored.
///
/// # Safety
/// `q` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ecbf_qp_free(q: *mut EcbfQp) {
    if !q.is_null() {
        drop(Box::from_raw(q));
    }
}

//! C interface to `fsde`.
//!
//! Objects are handed out as opaque pointers and must be released with the
//! matching `*_free` function. Every fallible call returns an [`FsdeStatus`];
//! on failure a description is available from [`fsde_last_error_message`]
//! on the same thread until the next failing call.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use libc::{c_char, c_void, size_t};

use fsde::catalog::{self, ProblemParams};
use fsde::harness::{self, StudyConfig};
use fsde::{
    BrownianPath, Error, FractionalOrders, Method, ProblemSpec, SoeApproximation, SolverConfig,
    TimeGrid, Trajectory,
};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsdeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Divergence, or a tolerance that could not be met.
    Numerical = 3,
    Io = 4,
    BufferTooSmall = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// Solver selection for [`fsde_solve`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsdeMethod {
    Direct = 0,
    Fast = 1,
}

/// `f(t, y)` or `g(t, y)` written to `out`; `y` and `out` hold `dim` values.
pub type FsdeVectorField = Option<
    extern "C" fn(t: f64, y: *const f64, out: *mut f64, dim: size_t, user_data: *mut c_void),
>;

pub struct FsdeSoe {
    inner: SoeApproximation,
}

pub struct FsdeProblem {
    inner: ProblemSpec,
}

pub struct FsdeTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FsdeStatus {
    match e {
        Error::NonFiniteState { .. } | Error::ToleranceNotMet { .. } => FsdeStatus::Numerical,
        Error::PathFailed { source, .. } | Error::StageFailed { source, .. } => status_of(source),
        Error::Io { .. } => FsdeStatus::Io,
        _ => FsdeStatus::InvalidArgument,
    }
}

fn fail(status: FsdeStatus, message: impl Into<String>) -> FsdeStatus {
    set_error(message.into());
    status
}

fn guard(body: impl FnOnce() -> Result<(), FsdeStatus>) -> FsdeStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => FsdeStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(FsdeStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn check<T>(r: fsde::Result<T>) -> Result<T, FsdeStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, FsdeStatus> {
    p.as_ref()
        .ok_or_else(|| fail(FsdeStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: size_t, what: &str) -> Result<&'a [f64], FsdeStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(FsdeStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, FsdeStatus> {
    p.as_mut()
        .ok_or_else(|| fail(FsdeStatus::NullPointer, format!("{what} is null")))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, FsdeStatus> {
    if p.is_null() {
        return Err(fail(FsdeStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(FsdeStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fsde_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn fsde_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a sum-of-exponentials approximation of `t^-alpha` on
/// `[delta, horizon]` with absolute error at most `epsilon`.
#[no_mangle]
pub unsafe extern "C" fn fsde_soe_build(
    alpha: f64,
    epsilon: f64,
    delta: f64,
    horizon: f64,
    out: *mut *mut FsdeSoe,
) -> FsdeStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let inner = check(fsde::build_soe(alpha, epsilon, delta, horizon))?;
        *out = Box::into_raw(Box::new(FsdeSoe { inner }));
        Ok(())
    })
}

/// Number of exponential terms, 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn fsde_soe_len(soe: *const FsdeSoe) -> size_t {
    soe.as_ref().map_or(0, |s| s.inner.n_exp())
}

/// Copies weights and exponents into caller buffers of length `capacity`.
#[no_mangle]
pub unsafe extern "C" fn fsde_soe_terms(
    soe: *const FsdeSoe,
    weights: *mut f64,
    exponents: *mut f64,
    capacity: size_t,
) -> FsdeStatus {
    guard(|| {
        let soe = non_null(soe, "soe")?;
        let terms = soe.inner.terms();
        if capacity < terms.len() {
            return Err(fail(
                FsdeStatus::BufferTooSmall,
                format!("need {} entries, got {capacity}", terms.len()),
            ));
        }
        if weights.is_null() || exponents.is_null() {
            return Err(fail(FsdeStatus::NullPointer, "output buffer is null"));
        }
        let w = std::slice::from_raw_parts_mut(weights, terms.len());
        let s = std::slice::from_raw_parts_mut(exponents, terms.len());
        for ((wi, si), term) in w.iter_mut().zip(s.iter_mut()).zip(terms) {
            *wi = term.weight;
            *si = term.exponent;
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fsde_soe_eval(soe: *const FsdeSoe, t: f64, out: *mut f64) -> FsdeStatus {
    guard(|| {
        let soe = non_null(soe, "soe")?;
        let out = out_arg(out, "out")?;
        *out = check(fsde::eval_soe(&soe.inner, t))?;
        Ok(())
    })
}

/// Maximum absolute error against `t^-alpha` over `samples` log-spaced
/// points in `[delta, horizon]`.
#[no_mangle]
pub unsafe extern "C" fn fsde_soe_validate(
    soe: *const FsdeSoe,
    samples: size_t,
    out: *mut f64,
) -> FsdeStatus {
    guard(|| {
        let soe = non_null(soe, "soe")?;
        let out = out_arg(out, "out")?;
        *out = fsde::validate_soe(&soe.inner, samples);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fsde_soe_free(soe: *mut FsdeSoe) {
    if !soe.is_null() {
        drop(Box::from_raw(soe));
    }
}

/// Instantiates a catalog problem by id. `horizon <= 0` keeps the default.
#[no_mangle]
pub unsafe extern "C" fn fsde_problem_from_catalog(
    id: *const c_char,
    horizon: f64,
    out: *mut *mut FsdeProblem,
) -> FsdeStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let id = str_arg(id, "id")?;
        let entry = check(catalog::lookup(id))?;
        let params = ProblemParams {
            horizon: (horizon > 0.0).then_some(horizon),
            y0: None,
        };
        let inner = check(entry.build(&params))?;
        *out = Box::into_raw(Box::new(FsdeProblem { inner }));
        Ok(())
    })
}

struct Callback {
    f: extern "C" fn(f64, *const f64, *mut f64, size_t, *mut c_void),
    user_data: *mut c_void,
    dim: usize,
}

// The caller promises the callbacks and user_data may be used from any
// thread; see fsde_problem_from_callbacks.
unsafe impl Send for Callback {}
unsafe impl Sync for Callback {}

impl Callback {
    fn call(&self, t: f64, y: &[f64], out: &mut [f64]) {
        (self.f)(t, y.as_ptr(), out.as_mut_ptr(), self.dim, self.user_data);
    }
}

/// Problem with caller-supplied coefficients. The callbacks may be invoked
/// concurrently from several threads when the problem is used in a study,
/// and must stay valid, together with `user_data`, until the handle is freed.
#[no_mangle]
pub unsafe extern "C" fn fsde_problem_from_callbacks(
    dim: size_t,
    y0: *const f64,
    horizon: f64,
    drift: FsdeVectorField,
    diffusion: FsdeVectorField,
    user_data: *mut c_void,
    out: *mut *mut FsdeProblem,
) -> FsdeStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let y0 = slice_arg(y0, dim, "y0")?.to_vec();
        let (Some(drift), Some(diffusion)) = (drift, diffusion) else {
            return Err(fail(FsdeStatus::NullPointer, "drift or diffusion callback is null"));
        };
        let f = Callback {
            f: drift,
            user_data,
            dim,
        };
        let g = Callback {
            f: diffusion,
            user_data,
            dim,
        };
        let inner = check(ProblemSpec::new(
            y0,
            horizon,
            Arc::new(move |t, y: &[f64], o: &mut [f64]| f.call(t, y, o)),
            Arc::new(move |t, y: &[f64], o: &mut [f64]| g.call(t, y, o)),
        ))?;
        *out = Box::into_raw(Box::new(FsdeProblem { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fsde_problem_dim(problem: *const FsdeProblem) -> size_t {
    problem.as_ref().map_or(0, |p| p.inner.dim())
}

#[no_mangle]
pub unsafe extern "C" fn fsde_problem_free(problem: *mut FsdeProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Fills `increments[0..steps]` with the Brownian increments of the path
/// with this seed on the uniform grid of `steps` cells over `[0, horizon]`.
#[no_mangle]
pub unsafe extern "C" fn fsde_brownian_sample(
    seed: u64,
    horizon: f64,
    steps: size_t,
    increments: *mut f64,
    capacity: size_t,
) -> FsdeStatus {
    guard(|| {
        let grid = check(TimeGrid::new(horizon, steps))?;
        if capacity < steps {
            return Err(fail(
                FsdeStatus::BufferTooSmall,
                format!("need {steps} entries, got {capacity}"),
            ));
        }
        if increments.is_null() {
            return Err(fail(FsdeStatus::NullPointer, "increments is null"));
        }
        let path = fsde::sample_path(seed, &grid);
        std::slice::from_raw_parts_mut(increments, steps).copy_from_slice(path.increments());
        Ok(())
    })
}

/// Path seed used by studies for path `index` under `base_seed`.
#[no_mangle]
pub extern "C" fn fsde_path_seed(base_seed: u64, index: size_t) -> u64 {
    fsde::path_seed(base_seed, index)
}

/// Solves on the grid defined by the problem horizon and `steps = n_increments`,
/// driven by the given increments. `soe_epsilon` is ignored by the direct method.
#[no_mangle]
pub unsafe extern "C" fn fsde_solve(
    problem: *const FsdeProblem,
    alphas: *const f64,
    n_alphas: size_t,
    method: FsdeMethod,
    soe_epsilon: f64,
    increments: *const f64,
    n_increments: size_t,
    out: *mut *mut FsdeTrajectory,
) -> FsdeStatus {
    guard(|| {
        let problem = &non_null(problem, "problem")?.inner;
        let out = out_arg(out, "out")?;
        let orders = check(FractionalOrders::new(slice_arg(alphas, n_alphas, "alphas")?))?;
        let increments = slice_arg(increments, n_increments, "increments")?.to_vec();
        let grid = check(TimeGrid::new(problem.horizon(), n_increments))?;
        let path = check(BrownianPath::from_increments(grid, increments, 0))?;
        let config = match method {
            FsdeMethod::Direct => SolverConfig::new(Method::Direct, &orders),
            FsdeMethod::Fast => {
                check(SolverConfig::new(Method::Fast, &orders).with_soe_epsilon(soe_epsilon))?
            }
        };
        let solver = check(config.prepare(&grid))?;
        let inner = check(solver.solve(problem, &path))?;
        *out = Box::into_raw(Box::new(FsdeTrajectory { inner }));
        Ok(())
    })
}

/// Number of time nodes, `steps + 1`.
#[no_mangle]
pub unsafe extern "C" fn fsde_trajectory_len(traj: *const FsdeTrajectory) -> size_t {
    traj.as_ref().map_or(0, |t| t.inner.len())
}

#[no_mangle]
pub unsafe extern "C" fn fsde_trajectory_dim(traj: *const FsdeTrajectory) -> size_t {
    traj.as_ref().map_or(0, |t| t.inner.dim())
}

/// Row-major `len x dim` states, owned by the handle.
#[no_mangle]
pub unsafe extern "C" fn fsde_trajectory_values(traj: *const FsdeTrajectory) -> *const f64 {
    traj.as_ref().map_or(ptr::null(), |t| t.inner.values().as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn fsde_trajectory_free(traj: *mut FsdeTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Runs a convergence study described by a JSON study configuration and
/// returns the JSON report in `*out`, to be released with [`fsde_string_free`].
#[no_mangle]
pub unsafe extern "C" fn fsde_run_study_json(
    config_json: *const c_char,
    out: *mut *mut c_char,
) -> FsdeStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let text = str_arg(config_json, "config_json")?;
        let config: StudyConfig = serde_json::from_str(text)
            .map_err(|e| fail(FsdeStatus::InvalidArgument, format!("bad study config: {e}")))?;
        let report = check(harness::run_study(&config))?;
        let json = serde_json::to_string(&report)
            .map_err(|e| fail(FsdeStatus::InvalidArgument, e.to_string()))?;
        *out = CString::new(json).expect("JSON has no nul").into_raw();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fsde_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

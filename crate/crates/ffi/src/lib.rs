//! C ABI over `ekdiff`.
//!
//! Every fallible function returns an [`EkStatus`] and writes its result
//! through an out-pointer. On failure the message is kept per thread and can
//! be read with [`ek_last_error`]. Solutions and ensembles are opaque handles
//! released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, c_void};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ekdiff::ekops::{self, EKParams, SampledFunction};
use ekdiff::greenfn::{ggbm_green, DiffusionParams};
use ekdiff::mwright::{mwright_eval, WrightOrder};
use ekdiff::sampler::{ggbm_paths, EnsembleConfig, PathEnsemble};
use ekdiff::solver::{solve, start_time, Grid1D, IcMode, SolutionField, SolverConfig, TimeRule};
use ekdiff::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EkStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    Numerical = 3,
    Unsupported = 4,
    BufferTooSmall = 5,
    OutOfRange = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EkTimeRule {
    EndpointAverage = 0,
    RightEndpoint = 1,
}

/// Solution levels of a run of the solver.
pub struct EkSolution(SolutionField);

/// Simulated ggBm paths.
pub struct EkEnsemble(PathEnsemble);

/// `f(t, user_data)`; used by the EK operators.
pub type EkCallback = Option<unsafe extern "C" fn(t: f64, user_data: *mut c_void) -> f64>;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> EkStatus {
    match e {
        Error::InvalidParameter(_)
        | Error::Domain(_)
        | Error::DiracOrder
        | Error::ParamMismatch(_)
        | Error::Resolution(_)
        | Error::InsufficientPaths { .. } => EkStatus::InvalidArgument,
        Error::Unsupported(_) => EkStatus::Unsupported,
        Error::Io(_) => EkStatus::Io,
        _ => EkStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (EkStatus, String)>) -> EkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EkStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            EkStatus::Panic
        }
    }
}

fn lib<T>(r: ekdiff::Result<T>) -> Result<T, (EkStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (EkStatus, String) {
    (EkStatus::NullPointer, format!("{what} is null"))
}

unsafe fn write<T>(out: *mut T, v: T, what: &str) -> Result<(), (EkStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), (EkStatus, String)> {
    if buf.is_null() {
        return Err(null("buf"));
    }
    if len < src.len() {
        return Err((EkStatus::BufferTooSmall, format!("buffer holds {len} values, {} needed", src.len())));
    }
    slice::from_raw_parts_mut(buf, src.len()).copy_from_slice(src);
    Ok(())
}

/// Copies the last error message of this thread into `buf` as a
/// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
/// message length without the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ek_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ek_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// M-Wright function `M_nu(z)` for `0 < nu < 1`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ek_mwright(nu: f64, z: f64, out: *mut f64) -> EkStatus {
    guard(|| {
        let v = lib(WrightOrder::new(nu).and_then(|o| mwright_eval(o, z)))?;
        write(out, v, "out")
    })
}

/// Green function of the ggBm equation at `(x, t)`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ek_green(alpha: f64, beta: f64, x: f64, t: f64, out: *mut f64) -> EkStatus {
    guard(|| {
        let v = lib(DiffusionParams::new(alpha, beta).and_then(|p| ggbm_green(p, x, t)))?;
        write(out, v, "out")
    })
}

fn callback_function(f: EkCallback, user_data: *mut c_void) -> Result<SampledFunction, (EkStatus, String)> {
    struct Ctx(unsafe extern "C" fn(f64, *mut c_void) -> f64, *mut c_void);
    unsafe impl Send for Ctx {}
    unsafe impl Sync for Ctx {}
    let f = f.ok_or_else(|| null("f"))?;
    let ctx = Ctx(f, user_data);
    Ok(SampledFunction::new(move |t| {
        let c = &ctx;
        unsafe { (c.0)(t, c.1) }
    }))
}

/// EK integral `I_eta^{gamma,mu} f` at `t`. The callback runs on the
/// calling thread.
///
/// # Safety
/// `f` must be safe to call with `user_data`; `out` must be valid for one
/// write.
#[no_mangle]
pub unsafe extern "C" fn ek_integral(
    gamma: f64,
    mu: f64,
    eta: f64,
    f: EkCallback,
    user_data: *mut c_void,
    t: f64,
    out: *mut f64,
) -> EkStatus {
    guard(|| {
        let p = lib(EKParams::new(gamma, mu, eta))?;
        let phi = callback_function(f, user_data)?;
        let v = lib(ekops::ek_integral(p, &phi, t))?;
        write(out, v, "out")
    })
}

/// EK derivative `D_eta^{gamma,mu} f` at `t`.
///
/// # Safety
/// As for [`ek_integral`].
#[no_mangle]
pub unsafe extern "C" fn ek_derivative(
    gamma: f64,
    mu: f64,
    eta: f64,
    f: EkCallback,
    user_data: *mut c_void,
    t: f64,
    out: *mut f64,
) -> EkStatus {
    guard(|| {
        let p = lib(EKParams::new(gamma, mu, eta))?;
        let phi = callback_function(f, user_data)?;
        let v = lib(ekops::ek_derivative(p, &phi, t))?;
        write(out, v, "out")
    })
}

/// Solves from the Green function at `t0` to `t_end` with `nt` levels on
/// `nx` nodes over `[-x_max, x_max]`. A non-positive `t0` or `x_max` picks
/// the default.
///
/// # Safety
/// `out` must be valid for one write. The handle must be released with
/// [`ek_solution_free`].
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ek_solve(
    alpha: f64,
    beta: f64,
    t0: f64,
    t_end: f64,
    nt: usize,
    nx: usize,
    x_max: f64,
    rule: EkTimeRule,
    out: *mut *mut EkSolution,
) -> EkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = lib(DiffusionParams::new(alpha, beta))?;
        let grid = lib(if x_max > 0.0 { Grid1D::symmetric(x_max, nx) } else { Grid1D::for_params(p, t_end, nx) })?;
        let t0 = if t0 > 0.0 { t0 } else { lib(start_time(p, grid.dx()))?.max(0.01) };
        let rule = match rule {
            EkTimeRule::EndpointAverage => TimeRule::EndpointAverage,
            EkTimeRule::RightEndpoint => TimeRule::RightEndpoint,
        };
        let config = SolverConfig { params: p, grid, t0, t_end, nt, ic_mode: IcMode::AnalyticGreen, rule };
        let field = lib(solve(&config))?;
        write(out, Box::into_raw(Box::new(EkSolution(field))), "out")
    })
}

/// # Safety
/// `s` must be null or a handle from [`ek_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ek_solution_free(s: *mut EkSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of time levels, or 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ek_solution_levels(s: *const EkSolution) -> usize {
    s.as_ref().map_or(0, |s| s.0.levels())
}

/// Number of spatial nodes, or 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ek_solution_nodes(s: *const EkSolution) -> usize {
    s.as_ref().map_or(0, |s| s.0.config.grid.nx)
}

/// # Safety
/// `s` must be null or a live handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ek_solution_time(s: *const EkSolution, level: usize, out: *mut f64) -> EkStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("solution"))?;
        let t = *s.0.times.get(level).ok_or((EkStatus::OutOfRange, format!("level {level} of {}", s.0.levels())))?;
        write(out, t, "out")
    })
}

/// Copies the node positions into `buf`.
///
/// # Safety
/// `s` must be null or a live handle; `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ek_solution_nodes_x(s: *const EkSolution, buf: *mut f64, len: usize) -> EkStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("solution"))?;
        copy_out(&s.0.x_nodes(), buf, len)
    })
}

/// Copies the values of one level into `buf`.
///
/// # Safety
/// `s` must be null or a live handle; `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ek_solution_values(s: *const EkSolution, level: usize, buf: *mut f64, len: usize) -> EkStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("solution"))?;
        let v = s.0.values.get(level).ok_or((EkStatus::OutOfRange, format!("level {level} of {}", s.0.levels())))?;
        copy_out(v, buf, len)
    })
}

/// Simulates `n_paths` ggBm paths at the `n_times` given times.
///
/// # Safety
/// `times` must be valid for `n_times` reads and `out` for one write. The
/// handle must be released with [`ek_ensemble_free`].
#[no_mangle]
pub unsafe extern "C" fn ek_simulate(
    alpha: f64,
    beta: f64,
    times: *const f64,
    n_times: usize,
    n_paths: usize,
    seed: u64,
    out: *mut *mut EkEnsemble,
) -> EkStatus {
    guard(|| {
        if times.is_null() {
            return Err(null("times"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let times = slice::from_raw_parts(times, n_times).to_vec();
        let p = lib(DiffusionParams::new(alpha, beta))?;
        let config = lib(EnsembleConfig::new(p, times, n_paths, seed))?;
        let ens = lib(ggbm_paths(&config))?;
        write(out, Box::into_raw(Box::new(EkEnsemble(ens))), "out")
    })
}

/// # Safety
/// `e` must be null or a handle from [`ek_simulate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ek_ensemble_free(e: *mut EkEnsemble) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// # Safety
/// `e` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ek_ensemble_paths(e: *const EkEnsemble) -> usize {
    e.as_ref().map_or(0, |e| e.0.paths.len())
}

/// Copies the time-change draws, one per path, into `buf`.
///
/// # Safety
/// `e` must be null or a live handle; `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ek_ensemble_tau(e: *const EkEnsemble, buf: *mut f64, len: usize) -> EkStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("ensemble"))?;
        copy_out(&e.0.tau, buf, len)
    })
}

/// Copies path `index` at every time node into `buf`.
///
/// # Safety
/// `e` must be null or a live handle; `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ek_ensemble_path(e: *const EkEnsemble, index: usize, buf: *mut f64, len: usize) -> EkStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(|| null("ensemble"))?;
        let p = e.0.paths.get(index).ok_or((EkStatus::OutOfRange, format!("path {index} of {}", e.0.paths.len())))?;
        copy_out(p, buf, len)
    })
}

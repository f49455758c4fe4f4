//! C interface to `switchopt`.
//!
//! Objects are opaque heap handles created by `swo_*_new`/`swo_*_load`
//! style functions and released with the matching `swo_*_free`. Every
//! fallible call returns a [`SwoStatus`]; on failure
//! [`swo_last_error_message`] describes what went wrong on the calling
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use switchopt::adjoint::optimality_theta;
use switchopt::config::{load_problem_file, RunConfig};
use switchopt::model::{builtin_problem, SwitchedProblem};
use switchopt::project::project_rk;
use switchopt::signal::{Grid, RelaxedSignal};
use switchopt::sim::{cost_j, simulate};
use switchopt::solver::{solve, SolveOutcome, SolverConfig, Status};
use switchopt::topology::TopologyKind;
use switchopt::Error;

/// Status codes. Zero is success; everything else is an error.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwoStatus {
    SwoOk = 0,
    SwoNullPointer = 1,
    /// Bad argument, dimension, grid or simplex row.
    SwoInvalidArgument = 2,
    SwoUnknownProblem = 3,
    /// Configuration, problem file, CSV or I/O failure.
    SwoIo = 4,
    /// Simulation blow-up, no admissible projection order, or
    /// enumeration too large.
    SwoNumerical = 5,
    SwoBufferTooSmall = 6,
    SwoPanic = 7,
}

/// Values for the `topology` argument of [`swo_solve`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwoTopology {
    SwoTerminalState = 0,
    SwoFullTrajectory = 1,
}

/// Termination reason of [`swo_solve`], matching the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwoSolveStatus {
    SwoStationary = 0,
    SwoStalled = 2,
    SwoMaxIter = 3,
}

pub struct SwoProblem(SwitchedProblem);

pub struct SwoSignal(RelaxedSignal);

pub struct SwoSolveResult(SolveOutcome);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> SwoStatus {
    match e {
        Error::Dimension { .. }
        | Error::Simplex { .. }
        | Error::GridMismatch { .. }
        | Error::Grid(_)
        | Error::Problem(_)
        | Error::InvalidArgument(_)
        | Error::ProjectionTooFine { .. } => SwoStatus::SwoInvalidArgument,
        Error::UnknownProblem(_) => SwoStatus::SwoUnknownProblem,
        Error::Config(_) | Error::Csv(_) | Error::Io(_) => SwoStatus::SwoIo,
        Error::Blowup { .. } | Error::KNotFound { .. } | Error::EnumerationBudget { .. } => {
            SwoStatus::SwoNumerical
        }
    }
}

struct Fail(SwoStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SwoStatus::SwoNullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic for `swo_last_error_message`.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SwoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            SwoStatus::SwoOk
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            SwoStatus::SwoPanic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(SwoStatus::SwoInvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_slice(src: &[f64], buf: *mut f64, len: usize) -> Result<(), Fail> {
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len < src.len() {
        return Err(Fail(
            SwoStatus::SwoBufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Message for the last failed call on this thread; empty after a
/// successful call. Valid until the next `swo_*` call on the same thread.
#[no_mangle]
pub extern "C" fn swo_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn swo_problem_builtin(name: *const c_char, out: *mut *mut SwoProblem) -> SwoStatus {
    guard(|| {
        let p = builtin_problem(string(name, "name")?)?;
        put(out, SwoProblem(p))
    })
}

/// Loads a problem file (TOML).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn swo_problem_load(path: *const c_char, out: *mut *mut SwoProblem) -> SwoStatus {
    guard(|| {
        let p = load_problem_file(Path::new(string(path, "path")?))?;
        put(out, SwoProblem(p))
    })
}

/// # Safety
/// `p` must come from `swo_problem_*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn swo_problem_free(p: *mut SwoProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live problem handle; the out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn swo_problem_dims(
    p: *const SwoProblem,
    n_x: *mut usize,
    n_sigma: *mut usize,
    t_f: *mut f64,
) -> SwoStatus {
    guard(|| {
        let p = &deref(p, "problem")?.0;
        if let Some(v) = n_x.as_mut() {
            *v = p.n_x();
        }
        if let Some(v) = n_sigma.as_mut() {
            *v = p.n_sigma();
        }
        if let Some(v) = t_f.as_mut() {
            *v = p.t_f();
        }
        Ok(())
    })
}

/// Relaxed signal on a uniform grid of `n_cells` cells over `[0, t_f]`.
/// `weights` holds `n_cells * n_sigma` values, one simplex row per cell.
///
/// # Safety
/// `weights` must point to `n_cells * n_sigma` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn swo_signal_new(
    t_f: f64,
    n_cells: usize,
    n_sigma: usize,
    weights: *const f64,
    out: *mut *mut SwoSignal,
) -> SwoStatus {
    guard(|| {
        if weights.is_null() {
            return Err(null("weights"));
        }
        let len = n_cells.checked_mul(n_sigma).ok_or_else(|| {
            Fail(SwoStatus::SwoInvalidArgument, "signal size overflows".into())
        })?;
        let d = std::slice::from_raw_parts(weights, len).to_vec();
        let s = RelaxedSignal::from_weights(Grid::uniform(t_f, n_cells)?, n_sigma, d)?;
        put(out, SwoSignal(s))
    })
}

/// The default starting signal for `problem` on `n_cells` uniform cells.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn swo_signal_initial(
    problem: *const SwoProblem,
    n_cells: usize,
    out: *mut *mut SwoSignal,
) -> SwoStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.0;
        let mut cfg = RunConfig::for_problem(p.name());
        cfg.solver.n = n_cells;
        let s = cfg.initial_signal(p)?;
        put(out, SwoSignal(s.into_relaxed()))
    })
}

/// # Safety
/// `s` must come from a `swo_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn swo_signal_free(s: *mut SwoSignal) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of cells, or 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live signal handle.
#[no_mangle]
pub unsafe extern "C" fn swo_signal_n_cells(s: *const SwoSignal) -> usize {
    s.as_ref().map_or(0, |s| s.0.n_cells())
}

/// Copies the `n_cells + 1` cell boundaries into `buf`.
///
/// # Safety
/// `s` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn swo_signal_boundaries(s: *const SwoSignal, buf: *mut f64, len: usize) -> SwoStatus {
    guard(|| write_slice(deref(s, "signal")?.0.grid().boundaries(), buf, len))
}

/// Copies the `n_cells * n_sigma` weights (row per cell) into `buf`.
///
/// # Safety
/// `s` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn swo_signal_weights(s: *const SwoSignal, buf: *mut f64, len: usize) -> SwoStatus {
    guard(|| write_slice(deref(s, "signal")?.0.weights(), buf, len))
}

/// Simulates from the problem's initial state; writes `x(t_f)` (`n_x`
/// values) and, when `cost` is non-null, the terminal cost.
///
/// # Safety
/// Handles must be live; `x_tf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn swo_simulate(
    problem: *const SwoProblem,
    signal: *const SwoSignal,
    substeps: usize,
    x_tf: *mut f64,
    len: usize,
    cost: *mut f64,
) -> SwoStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.0;
        let s = &deref(signal, "signal")?.0;
        let traj = simulate(p, s, p.x0(), substeps)?;
        write_slice(traj.terminal_state(), x_tf, len)?;
        if let Some(c) = cost.as_mut() {
            *c = cost_j(p, &traj);
        }
        Ok(())
    })
}

/// Optimality function value; when `direction` is non-null it receives a
/// new handle for the vertex-valued descent target.
///
/// # Safety
/// Handles must be live and `theta` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn swo_theta(
    problem: *const SwoProblem,
    signal: *const SwoSignal,
    substeps: usize,
    theta: *mut f64,
    direction: *mut *mut SwoSignal,
) -> SwoStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.0;
        let s = &deref(signal, "signal")?.0;
        let out = theta.as_mut().ok_or_else(|| null("theta"))?;
        let th = optimality_theta(p, s, p.x0(), substeps)?;
        *out = th.theta;
        if !direction.is_null() {
            put(direction, SwoSignal(th.direction.into_relaxed()))?;
        }
        Ok(())
    })
}

/// Pulse-width projection with `2^k` periods.
///
/// # Safety
/// `signal` must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn swo_project(signal: *const SwoSignal, k: u32, out: *mut *mut SwoSignal) -> SwoStatus {
    guard(|| {
        let p = project_rk(&deref(signal, "signal")?.0, k)?;
        put(out, SwoSignal(p.into_relaxed()))
    })
}

/// Runs the solver with default settings, the given [`SwoTopology`] and
/// iteration cap, on the grid of `initial` (which must be pure).
///
/// # Safety
/// Handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn swo_solve(
    problem: *const SwoProblem,
    initial: *const SwoSignal,
    topology: u32,
    max_iter: usize,
    out: *mut *mut SwoSolveResult,
) -> SwoStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.0;
        let s = &deref(initial, "initial signal")?.0;
        let s0 = switchopt::signal::PureSignal::from_relaxed(s.clone(), 1e-12)?;
        let cfg = SolverConfig {
            topology: match topology {
                t if t == SwoTopology::SwoTerminalState as u32 => TopologyKind::TerminalState,
                t if t == SwoTopology::SwoFullTrajectory as u32 => TopologyKind::FullTrajectory,
                t => return Err(Fail(SwoStatus::SwoInvalidArgument, format!("unknown topology {t}"))),
            },
            max_iter,
            n: s.n_cells(),
            ..SolverConfig::default()
        };
        let outcome = solve(p, p.x0(), &s0, &cfg)?;
        put(out, SwoSolveResult(outcome))
    })
}

/// # Safety
/// `r` must come from [`swo_solve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn swo_result_free(r: *mut SwoSolveResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Termination reason, final cost and number of outer iterations.
///
/// # Safety
/// `r` must be live; the out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn swo_result_summary(
    r: *const SwoSolveResult,
    status: *mut SwoSolveStatus,
    cost: *mut f64,
    iterations: *mut usize,
) -> SwoStatus {
    guard(|| {
        let o = &deref(r, "result")?.0;
        let last = o.final_record();
        if let Some(v) = status.as_mut() {
            *v = match o.status {
                Status::Stationary => SwoSolveStatus::SwoStationary,
                Status::Stalled => SwoSolveStatus::SwoStalled,
                Status::MaxIter => SwoSolveStatus::SwoMaxIter,
            };
        }
        if let Some(v) = cost.as_mut() {
            *v = last.j;
        }
        if let Some(v) = iterations.as_mut() {
            *v = last.iter;
        }
        Ok(())
    })
}

/// # Safety
/// `r` must be live and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn swo_result_terminal_state(r: *const SwoSolveResult, buf: *mut f64, len: usize) -> SwoStatus {
    guard(|| write_slice(&deref(r, "result")?.0.final_record().terminal_state, buf, len))
}

/// New handle holding the final pure signal.
///
/// # Safety
/// `r` must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn swo_result_solution(r: *const SwoSolveResult, out: *mut *mut SwoSignal) -> SwoStatus {
    guard(|| {
        let o = &deref(r, "result")?.0;
        put(out, SwoSignal(o.solution.as_relaxed().clone()))
    })
}

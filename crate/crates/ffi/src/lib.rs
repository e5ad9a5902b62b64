//! C ABI over `perfbie`: opaque problem and solution handles, status codes,
//! and a per-thread last-error message.
//!
//! Every handle returned through an out-pointer must be released with the
//! matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use perfbie::representation::{build_field, HarmonicField};
use perfbie::rescaled::{solve_densities, DensityQuadruple, PreparedConfig};
use perfbie::{Error, Point, ProblemConfig};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerfbieStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    Geometry = 4,
    SingularSystem = 5,
    TargetRejected = 6,
    Io = 7,
    Internal = 8,
}

/// A validated configuration with its parameter-independent operators.
pub struct PerfbieProblem {
    prep: PreparedConfig,
}

/// Densities at one parameter pair and the field they define.
pub struct PerfbieSolution {
    quad: DensityQuadruple,
    field: HarmonicField,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> PerfbieStatus {
    match err {
        Error::InvalidCurve(_) | Error::Config(_) | Error::Json(_) | Error::InvalidRule(_) => {
            PerfbieStatus::InvalidConfig
        }
        Error::Geometry(_) | Error::CurvesIntersect => PerfbieStatus::Geometry,
        Error::SingularSystem(_) => PerfbieStatus::SingularSystem,
        Error::GuardBand { .. }
        | Error::InsideHole { .. }
        | Error::OutsideDomain { .. }
        | Error::SingularEvaluation(_) => PerfbieStatus::TargetRejected,
        Error::Io(_) => PerfbieStatus::Io,
        Error::InvalidParameter(_) | Error::LengthMismatch { .. } => PerfbieStatus::InvalidArgument,
        _ => PerfbieStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (PerfbieStatus, String)>) -> PerfbieStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PerfbieStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside perfbie".into());
            PerfbieStatus::Internal
        }
    }
}

fn lift(err: Error) -> (PerfbieStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (PerfbieStatus, String) {
    (PerfbieStatus::NullPointer, format!("{what} is null"))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn perfbie_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn perfbie_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

fn store_problem(config: ProblemConfig, out: *mut *mut PerfbieProblem) -> Result<(), (PerfbieStatus, String)> {
    let prep = PreparedConfig::new(&config).map_err(lift)?;
    // SAFETY: the caller checked `out` for null
    unsafe { *out = Box::into_raw(Box::new(PerfbieProblem { prep })) };
    Ok(())
}

/// The built-in two-hole configuration, with `nodes` per curve (0 keeps 128).
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn perfbie_problem_default(nodes: usize, out: *mut *mut PerfbieProblem) -> PerfbieStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mut config = ProblemConfig::default_two_holes();
        if nodes != 0 {
            config = config.with_nodes(nodes);
        }
        store_problem(config, out)
    })
}

/// Parses a JSON configuration.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn perfbie_problem_from_json(
    json: *const c_char,
    out: *mut *mut PerfbieProblem,
) -> PerfbieStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (PerfbieStatus::InvalidArgument, format!("json is not UTF-8: {e}")))?;
        store_problem(ProblemConfig::from_json(text).map_err(lift)?, out)
    })
}

/// # Safety
/// `problem` must come from a `perfbie_problem_*` constructor, or be null.
#[no_mangle]
pub unsafe extern "C" fn perfbie_problem_free(problem: *mut PerfbieProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Nodes per curve, or 0 for a null handle.
///
/// # Safety
/// `problem` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn perfbie_problem_nodes(problem: *const PerfbieProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.prep.m())
}

/// Solves at `(rho1, rho2)`.
///
/// # Safety
/// `problem` must be a live handle and `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn perfbie_solve(
    problem: *const PerfbieProblem,
    rho1: f64,
    rho2: f64,
    out: *mut *mut PerfbieSolution,
) -> PerfbieStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let quad = solve_densities(&p.prep, rho1, rho2).map_err(lift)?;
        let field = build_field(&p.prep, rho1, rho2, &quad).map_err(lift)?;
        *out = Box::into_raw(Box::new(PerfbieSolution { quad, field }));
        Ok(())
    })
}

/// # Safety
/// `solution` must come from [`perfbie_solve`], or be null.
#[no_mangle]
pub unsafe extern "C" fn perfbie_solution_free(solution: *mut PerfbieSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Field value at `(x, y)`; targets in holes, outside the domain or within
/// a guard band are rejected.
///
/// # Safety
/// `solution` must be a live handle and `value` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn perfbie_solution_eval(
    solution: *const PerfbieSolution,
    x: f64,
    y: f64,
    value: *mut f64,
) -> PerfbieStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if value.is_null() {
            return Err(null("value"));
        }
        *value = s.field.eval(Point::new(x, y)).map_err(lift)?;
        Ok(())
    })
}

/// 1-norm condition number of the solved system.
///
/// # Safety
/// `solution` must be a live handle and `value` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn perfbie_solution_condition(
    solution: *const PerfbieSolution,
    value: *mut f64,
) -> PerfbieStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if value.is_null() {
            return Err(null("value"));
        }
        *value = s.quad.condition;
        Ok(())
    })
}

/// `integral theta_j - integral f_j` for hole `j` (1 or 2).
///
/// # Safety
/// `solution` must be a live handle and `value` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn perfbie_solution_flux_defect(
    solution: *const PerfbieSolution,
    j: u32,
    value: *mut f64,
) -> PerfbieStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if value.is_null() {
            return Err(null("value"));
        }
        if !(j == 1 || j == 2) {
            return Err((PerfbieStatus::InvalidArgument, format!("hole index must be 1 or 2, got {j}")));
        }
        *value = s.quad.flux_defect[j as usize - 1];
        Ok(())
    })
}

/// Copies the densities `theta_1, theta_2, theta_o` (each `M` values) and
/// `xi` into `buffer`, which must hold `3 M + 1` doubles.
///
/// # Safety
/// `solution` must be a live handle and `buffer` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn perfbie_solution_densities(
    solution: *const PerfbieSolution,
    buffer: *mut f64,
    len: usize,
) -> PerfbieStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if buffer.is_null() {
            return Err(null("buffer"));
        }
        let stacked = s.quad.stacked();
        if len != stacked.len() {
            return Err((
                PerfbieStatus::InvalidArgument,
                format!("buffer holds {len} values, need {}", stacked.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buffer, len).copy_from_slice(stacked.as_slice());
        Ok(())
    })
}

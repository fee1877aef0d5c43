//! C interface to `packlp`.
//!
//! Objects are opaque handles created by `packlp_*_new`/`packlp_solve`/
//! `packlp_run` and released by the matching `*_free`. Every fallible call
//! returns a [`PacklpStatus`]; on failure the message is available from
//! [`packlp_last_error`] on the same thread. Strings returned through `char**`
//! are owned by the caller and must be released with [`packlp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use packlp::harness::{bernstein_tail_bound, run_experiment, ExperimentConfig};
use packlp::instance::{generate, GeneratorSpec, PackingInstance};
use packlp::online::Runner;
use packlp::solver::{solve, OfflineSolution};
use packlp::{Algorithm, Error, HaltMode, OnlineRunTrace, PermutationStream};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacklpStatus {
    Ok = 0,
    /// I/O or other runtime failure.
    Failure = 1,
    /// Invalid instance or parameter.
    Validation = 2,
    /// The LP solver could not certify an optimum.
    Solver = 3,
    NullPointer = 4,
    InvalidUtf8 = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
    /// A caller buffer is too short.
    BufferTooSmall = 7,
}

/// `halt_mode` for `packlp_run`: stop at the first column that does not fit.
pub const PACKLP_HALT: c_int = 0;
/// `halt_mode` for `packlp_run`: reject that column and continue.
pub const PACKLP_SKIP: c_int = 1;

pub struct PacklpInstance(PackingInstance);
pub struct PacklpSolution(OfflineSolution);
pub struct PacklpTrace(OnlineRunTrace);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(PacklpStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e.exit_code() {
            2 => PacklpStatus::Validation,
            3 => PacklpStatus::Solver,
            _ => PacklpStatus::Failure,
        };
        Fail(status, e.to_string())
    }
}

impl From<serde_json::Error> for Fail {
    fn from(e: serde_json::Error) -> Self {
        Fail(PacklpStatus::Validation, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PacklpStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PacklpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PacklpStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside packlp".into());
            PacklpStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(PacklpStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = CString::new(s).map_err(|e| Fail(PacklpStatus::Failure, e.to_string()))?.into_raw();
    Ok(())
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), Fail> {
    if len < src.len() {
        return Err(Fail(PacklpStatus::BufferTooSmall, format!("need {} entries, got {len}", src.len())));
    }
    if src.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(null("buffer"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn packlp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn packlp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds an instance from `n` rewards and an `n × m` column-major matrix
/// (column `t` occupies `columns[t*m .. t*m+m]`).
///
/// # Safety
/// `rewards` must hold `n` values, `columns` `n*m` values.
#[no_mangle]
pub unsafe extern "C" fn packlp_instance_new(
    rewards: *const f64,
    columns: *const f64,
    n: usize,
    m: usize,
    budget: f64,
    out: *mut *mut PacklpInstance,
) -> PacklpStatus {
    guard(|| {
        if rewards.is_null() || columns.is_null() {
            return Err(null("rewards or columns"));
        }
        let size = n.checked_mul(m).ok_or_else(|| Fail(PacklpStatus::Validation, "n*m overflows".into()))?;
        let r = std::slice::from_raw_parts(rewards, n).to_vec();
        let flat = std::slice::from_raw_parts(columns, size);
        let cols = if m == 0 { vec![Vec::new(); n] } else { flat.chunks(m).map(<[f64]>::to_vec).collect() };
        put(out, PacklpInstance(PackingInstance::new(r, cols, budget)?))
    })
}

/// Parses an instance from JSON with fields `n`, `m`, `budget`, `rewards`,
/// `columns`.
///
/// # Safety
/// `json` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn packlp_instance_from_json(json: *const c_char, out: *mut *mut PacklpInstance) -> PacklpStatus {
    guard(|| put(out, PacklpInstance(PackingInstance::from_json_str(str_arg(json, "json")?)?)))
}

/// Draws an instance from a generator spec such as
/// `{"family":"k-subspace","k":3,"seed":7}`.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn packlp_instance_generate(
    spec_json: *const c_char,
    n: usize,
    m: usize,
    budget: f64,
    out: *mut *mut PacklpInstance,
) -> PacklpStatus {
    guard(|| {
        let spec: GeneratorSpec = serde_json::from_str(str_arg(spec_json, "spec")?)?;
        put(out, PacklpInstance(generate(&spec, n, m, budget)?))
    })
}

/// # Safety
/// `instance` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn packlp_instance_to_json(instance: *const PacklpInstance, out: *mut *mut c_char) -> PacklpStatus {
    guard(|| put_string(out, ref_arg(instance, "instance")?.0.to_json_string()?))
}

/// Number of columns, or 0 for NULL.
///
/// # Safety
/// `instance` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn packlp_instance_n(instance: *const PacklpInstance) -> usize {
    instance.as_ref().map_or(0, |i| i.0.n)
}

/// Number of rows, or 0 for NULL.
///
/// # Safety
/// `instance` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn packlp_instance_m(instance: *const PacklpInstance) -> usize {
    instance.as_ref().map_or(0, |i| i.0.m)
}

/// # Safety
/// `instance` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn packlp_instance_free(instance: *mut PacklpInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Solves the offline LP. A positive `budget` replaces the instance budget;
/// pass 0 to keep it.
///
/// # Safety
/// `instance` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn packlp_solve(
    instance: *const PacklpInstance,
    budget: f64,
    out: *mut *mut PacklpSolution,
) -> PacklpStatus {
    guard(|| {
        let inst = &ref_arg(instance, "instance")?.0;
        let over = (budget != 0.0).then_some(budget);
        put(out, PacklpSolution(solve(inst, over)?))
    })
}

/// Optimal objective value, or NaN for NULL.
///
/// # Safety
/// `solution` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn packlp_solution_value(solution: *const PacklpSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.0.value)
}

/// Copies the `n` primal values into `buf` of length `len`.
///
/// # Safety
/// `buf` must be writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn packlp_solution_primal(solution: *const PacklpSolution, buf: *mut f64, len: usize) -> PacklpStatus {
    guard(|| copy_out(&ref_arg(solution, "solution")?.0.x, buf, len))
}

/// Copies the `m` dual prices into `buf` of length `len`.
///
/// # Safety
/// `buf` must be writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn packlp_solution_prices(solution: *const PacklpSolution, buf: *mut f64, len: usize) -> PacklpStatus {
    guard(|| copy_out(&ref_arg(solution, "solution")?.0.p, buf, len))
}

/// # Safety
/// `solution` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn packlp_solution_to_json(solution: *const PacklpSolution, out: *mut *mut c_char) -> PacklpStatus {
    guard(|| put_string(out, serde_json::to_string(&ref_arg(solution, "solution")?.0)?))
}

/// # Safety
/// `solution` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn packlp_solution_free(solution: *mut PacklpSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Runs one algorithm (`"greedy"`, `"otp"`, `"robust-otp"`, `"robust-dpa"`)
/// on the arrival order drawn from `seed`.
///
/// # Safety
/// `instance` must be a live handle, `algorithm` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn packlp_run(
    instance: *const PacklpInstance,
    algorithm: *const c_char,
    epsilon: f64,
    seed: u64,
    halt_mode: c_int,
    out: *mut *mut PacklpTrace,
) -> PacklpStatus {
    guard(|| {
        let inst = &ref_arg(instance, "instance")?.0;
        let algo: Algorithm = str_arg(algorithm, "algorithm")?.parse()?;
        let halt = match halt_mode {
            PACKLP_HALT => HaltMode::Halt,
            PACKLP_SKIP => HaltMode::Skip,
            m => return Err(Fail(PacklpStatus::Validation, format!("unknown halt mode {m}"))),
        };
        let runner = Runner::new(inst, epsilon, halt, &[algo])?;
        let trace = runner.run_stream(algo, PermutationStream::shuffled(inst, seed))?;
        put(out, PacklpTrace(trace))
    })
}

/// Total reward collected, or NaN for NULL.
///
/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn packlp_trace_value(trace: *const PacklpTrace) -> f64 {
    trace.as_ref().map_or(f64::NAN, |t| t.0.value)
}

/// 1 if the accepted columns fit the budget, 0 if not, -1 for NULL.
///
/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn packlp_trace_feasible(trace: *const PacklpTrace) -> c_int {
    trace.as_ref().map_or(-1, |t| c_int::from(t.0.feasible))
}

/// Number of accepted columns, or 0 for NULL.
///
/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn packlp_trace_accepted(trace: *const PacklpTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.accepted())
}

/// # Safety
/// `trace` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn packlp_trace_to_json(trace: *const PacklpTrace, out: *mut *mut c_char) -> PacklpStatus {
    guard(|| put_string(out, serde_json::to_string(&ref_arg(trace, "trace")?.0)?))
}

/// # Safety
/// `trace` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn packlp_trace_free(trace: *mut PacklpTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Runs an experiment described by a JSON experiment config and returns the
/// report as JSON.
///
/// # Safety
/// `config_json` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn packlp_run_experiment(config_json: *const c_char, out: *mut *mut c_char) -> PacklpStatus {
    guard(|| {
        let config: ExperimentConfig = serde_json::from_str(str_arg(config_json, "config")?)?;
        let report = run_experiment(&config)?;
        put_string(out, serde_json::to_string(&report)?)
    })
}

/// Bernstein tail bound; pass NaN as `sigma_sq` for the variance-free form.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn packlp_bernstein_tail_bound(
    s: usize,
    mu: f64,
    sigma_sq: f64,
    tau: f64,
    out: *mut f64,
) -> PacklpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let var = (!sigma_sq.is_nan()).then_some(sigma_sq);
        *out = bernstein_tail_bound(s, mu, var, tau)?;
        Ok(())
    })
}

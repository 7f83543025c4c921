//! C interface to `optbench-core`.
//!
//! Every fallible function returns an [`ObStatus`]; on failure a message is
//! available from [`ob_last_error`] on the same thread. Traces are opaque
//! handles released with [`ob_trace_free`]. Iteration indices are 1-based,
//! as in the core library.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use optbench_core::bea::{run_bea, BeaConfig};
use optbench_core::bench::{Benchmark, BenchmarkFunction};
use optbench_core::bo::{run_bo, BoConfig};
use optbench_core::ea::{run_ea, EaConfig};
use optbench_core::efficiency::{gain, interval_cost, time_efficiency};
use optbench_core::harness::{default_theta, Algorithm};
use optbench_core::stats::mann_whitney_greater;
use optbench_core::{Error, ObjectiveError, SearchSpace, Stage, Trace};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObStatus {
    Ok = 0,
    InvalidArgument = 1,
    OutOfBounds = 2,
    DimensionMismatch = 3,
    Numeric = 4,
    Objective = 5,
    Io = 6,
    Parse = 7,
    NullPointer = 8,
    Panic = 9,
}

/// Stage tag of a record.
pub const OB_STAGE_BO: c_int = 0;
pub const OB_STAGE_EA: c_int = 1;

/// Objective callback for [`ob_run_custom`]. Returns the value to maximize
/// at `x[0..dims]`; setting `*failed` to a nonzero value aborts the run.
pub type ObObjectiveFn =
    Option<unsafe extern "C" fn(x: *const f64, dims: usize, user_data: *mut c_void, failed: *mut c_int) -> f64>;

/// A finished optimizer run.
pub struct ObTrace {
    inner: Trace,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> ObStatus {
    match err {
        Error::OutOfBounds { .. } => ObStatus::OutOfBounds,
        Error::InvalidArgument(_) => ObStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => ObStatus::DimensionMismatch,
        Error::NotPositiveDefinite { .. } => ObStatus::Numeric,
        Error::Objective { .. } => ObStatus::Objective,
        Error::Io { .. } => ObStatus::Io,
        Error::Csv { .. } | Error::Parse { .. } => ObStatus::Parse,
    }
}

fn fail(status: ObStatus, msg: impl AsRef<str>) -> ObStatus {
    set_error(msg.as_ref());
    status
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), ObStatus>) -> ObStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ObStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            fail(ObStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

fn lift<T>(r: optbench_core::Result<T>) -> Result<T, ObStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, ObStatus> {
    if p.is_null() {
        return Err(fail(ObStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ObStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn trace_ref<'a>(t: *const ObTrace) -> Result<&'a Trace, ObStatus> {
    t.as_ref()
        .map(|t| &t.inner)
        .ok_or_else(|| fail(ObStatus::NullPointer, "trace handle is null"))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, ObStatus> {
    p.as_mut()
        .ok_or_else(|| fail(ObStatus::NullPointer, format!("{what} is null")))
}

fn boxed(trace: Trace) -> *mut ObTrace {
    Box::into_raw(Box::new(ObTrace { inner: trace }))
}

/// Message of the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn ob_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ob_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn run_algorithm<O: optbench_core::Objective>(
    algorithm: Algorithm,
    objective: &mut O,
    space: &SearchSpace,
    theta: f64,
    iters: usize,
    seed: u64,
) -> optbench_core::Result<Trace> {
    let bo = BoConfig {
        theta,
        seed,
        ..BoConfig::default()
    };
    match algorithm {
        Algorithm::Bo => run_bo(objective, space, &bo, iters),
        Algorithm::Ea => run_ea(
            objective,
            space,
            &EaConfig {
                seed,
                ..EaConfig::default()
            },
            iters,
            None,
        ),
        Algorithm::Bea => run_bea(
            objective,
            space,
            &BeaConfig {
                bo,
                seed,
                ..BeaConfig::default()
            },
            iters,
        ),
    }
}

/// Runs `algorithm` ("bo", "ea" or "bea") on a built-in benchmark
/// ("griewank", "rastrigin" or "schwefel") with default settings.
///
/// # Safety
/// `function` and `algorithm` must be NUL-terminated strings; `out` must be
/// a valid pointer. On success `*out` receives a handle to free with
/// [`ob_trace_free`].
#[no_mangle]
pub unsafe extern "C" fn ob_run_benchmark(
    function: *const c_char,
    algorithm: *const c_char,
    dims: usize,
    iters: usize,
    seed: u64,
    out: *mut *mut ObTrace,
) -> ObStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let kind: Benchmark = lift(read_str(function, "function")?.parse())?;
        let algorithm: Algorithm = lift(read_str(algorithm, "algorithm")?.parse())?;
        let bench = lift(BenchmarkFunction::new(kind, dims))?;
        let mut objective = bench.objective();
        let trace = lift(run_algorithm(
            algorithm,
            &mut objective,
            &bench.domain(),
            default_theta(kind),
            iters,
            seed,
        ))?;
        *out = boxed(trace);
        Ok(())
    })
}

/// Runs `algorithm` on a caller-supplied objective over the box
/// `[lower, upper]`, maximizing. `theta` is the GP length scale in
/// normalized units.
///
/// # Safety
/// `lower` and `upper` must point to `dims` doubles, `algorithm` must be a
/// NUL-terminated string and `out` a valid pointer. `objective` is called
/// on this thread with `user_data` passed through unchanged.
#[no_mangle]
pub unsafe extern "C" fn ob_run_custom(
    algorithm: *const c_char,
    lower: *const f64,
    upper: *const f64,
    dims: usize,
    iters: usize,
    seed: u64,
    theta: f64,
    objective: ObObjectiveFn,
    user_data: *mut c_void,
    out: *mut *mut ObTrace,
) -> ObStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let algorithm: Algorithm = lift(read_str(algorithm, "algorithm")?.parse())?;
        let callback = objective.ok_or_else(|| fail(ObStatus::NullPointer, "objective callback is null"))?;
        if lower.is_null() || upper.is_null() {
            return Err(fail(ObStatus::NullPointer, "bounds are null"));
        }
        if dims == 0 {
            return Err(fail(ObStatus::InvalidArgument, "dims must be positive"));
        }
        let lo = std::slice::from_raw_parts(lower, dims).to_vec();
        let hi = std::slice::from_raw_parts(upper, dims).to_vec();
        let space = lift(SearchSpace::new(lo, hi))?;
        let mut f = |x: &[f64]| -> Result<f64, ObjectiveError> {
            let mut failed: c_int = 0;
            // SAFETY: the caller guarantees the callback accepts `dims` doubles.
            let v = unsafe { callback(x.as_ptr(), x.len(), user_data, &mut failed) };
            if failed != 0 {
                Err(ObjectiveError("objective callback reported failure".into()))
            } else {
                Ok(v)
            }
        };
        let trace = lift(run_algorithm(algorithm, &mut f, &space, theta, iters, seed))?;
        *out = boxed(trace);
        Ok(())
    })
}

/// Releases a trace. Null is ignored.
///
/// # Safety
/// `trace` must be null or a handle returned by this library that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn ob_trace_free(trace: *mut ObTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of records, or 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ob_trace_len(trace: *const ObTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.inner.len())
}

/// Dimension of record `i`'s solution (0 for traces read from CSV).
///
/// # Safety
/// `trace` must be a live handle and `dims` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ob_trace_solution_dims(trace: *const ObTrace, i: usize, dims: *mut usize) -> ObStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        let r = lift(t.get(i))?;
        *out_ptr(dims, "dims")? = r.solution.len();
        Ok(())
    })
}

/// Objective, overhead and stage ([`OB_STAGE_BO`] or [`OB_STAGE_EA`]) of
/// record `i`. Any output pointer may be null.
///
/// # Safety
/// `trace` must be a live handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn ob_trace_record(
    trace: *const ObTrace,
    i: usize,
    objective: *mut f64,
    overhead_s: *mut f64,
    stage: *mut c_int,
) -> ObStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        let r = lift(t.get(i))?;
        if let Some(o) = objective.as_mut() {
            *o = r.objective;
        }
        if let Some(o) = overhead_s.as_mut() {
            *o = r.overhead_s;
        }
        if let Some(s) = stage.as_mut() {
            *s = match r.stage {
                Stage::Bo => OB_STAGE_BO,
                Stage::Ea => OB_STAGE_EA,
            };
        }
        Ok(())
    })
}

/// Copies record `i`'s solution into `buf`, which holds `len` doubles.
///
/// # Safety
/// `trace` must be a live handle and `buf` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn ob_trace_solution(trace: *const ObTrace, i: usize, buf: *mut f64, len: usize) -> ObStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        let r = lift(t.get(i))?;
        if r.solution.len() != len {
            return Err(fail(
                ObStatus::DimensionMismatch,
                format!("solution has {} values, buffer holds {len}", r.solution.len()),
            ));
        }
        if buf.is_null() {
            return Err(fail(ObStatus::NullPointer, "buffer is null"));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(&r.solution);
        Ok(())
    })
}

/// Best objective among records `1..=i`.
///
/// # Safety
/// `trace` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ob_best_so_far(trace: *const ObTrace, i: usize, out: *mut f64) -> ObStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        *out_ptr(out, "out")? = lift(optbench_core::efficiency::best_so_far(t, i))?;
        Ok(())
    })
}

/// Improvement of the best objective between iterations `k` and `i`.
///
/// # Safety
/// `trace` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ob_gain(trace: *const ObTrace, k: usize, i: usize, out: *mut f64) -> ObStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        *out_ptr(out, "out")? = lift(gain(t, k, i))?;
        Ok(())
    })
}

/// Time spent between iterations `k` and `i` with evaluation time `te`.
///
/// # Safety
/// `trace` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ob_interval_cost(
    trace: *const ObTrace,
    k: usize,
    i: usize,
    te: f64,
    out: *mut f64,
) -> ObStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        *out_ptr(out, "out")? = lift(interval_cost(t, k, i, te))?;
        Ok(())
    })
}

/// Gain per second between iterations `k` and `i`.
///
/// # Safety
/// `trace` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ob_time_efficiency(
    trace: *const ObTrace,
    k: usize,
    i: usize,
    te: f64,
    out: *mut f64,
) -> ObStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        *out_ptr(out, "out")? = lift(time_efficiency(t, k, i, te))?;
        Ok(())
    })
}

/// Writes the trace as CSV (`iter,f,f_best,overhead_s`).
///
/// # Safety
/// `trace` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ob_trace_save_csv(trace: *const ObTrace, path: *const c_char) -> ObStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        let path = read_str(path, "path")?;
        lift(t.save_csv(Path::new(path)))
    })
}

/// Reads a trace CSV. Solutions are not stored in the file, so records of
/// the returned trace have dimension 0 and stage BO.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ob_trace_load_csv(path: *const c_char, out: *mut *mut ObTrace) -> ObStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let path = read_str(path, "path")?;
        let trace = lift(Trace::load_csv(Path::new(path), "csv", 0, Stage::Bo))?;
        *out = boxed(trace);
        Ok(())
    })
}

/// One-sided Mann–Whitney U test that sample `a` tends to exceed `b`.
/// `u` may be null.
///
/// # Safety
/// `a` and `b` must point to `na` and `nb` doubles; `p_value` must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn ob_mann_whitney_greater(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    p_value: *mut f64,
    u: *mut f64,
) -> ObStatus {
    guard(|| {
        if a.is_null() || b.is_null() {
            return Err(fail(ObStatus::NullPointer, "sample is null"));
        }
        let p_out = out_ptr(p_value, "p_value")?;
        let a = std::slice::from_raw_parts(a, na);
        let b = std::slice::from_raw_parts(b, nb);
        let t = lift(mann_whitney_greater(a, b))?;
        *p_out = t.p_value;
        if let Some(u) = u.as_mut() {
            *u = t.u;
        }
        Ok(())
    })
}

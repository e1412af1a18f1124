//! C ABI for jetkcc.
//!
//! Handles are opaque pointers created by `jk_*_new`/`jk_*_load` functions
//! and released with the matching `jk_*_free`. Every fallible function
//! returns a [`JkStatus`]; on failure a message for the calling thread is
//! available from [`jk_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use jetkcc::characterize::star_star_nullspace;
use jetkcc::cli::{run_invariants, ProblemFile, SampleOptions};
use jetkcc::jetgeom::MetricGeometry;
use jetkcc::kcc::{Invariant, KccSystem};
use jetkcc::{Error, Expr, JetPoint, MetricField, MetricKind};

/// Result codes. The first four match the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JkStatus {
    Ok = 0,
    CheckFailed = 1,
    InvalidInput = 2,
    Numeric = 3,
    NullPointer = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JkInvariant {
    Epsilon = 0,
    P = 1,
    R = 2,
    B = 3,
    D = 4,
}

impl From<JkInvariant> for Invariant {
    fn from(w: JkInvariant) -> Invariant {
        match w {
            JkInvariant::Epsilon => Invariant::Epsilon,
            JkInvariant::P => Invariant::P,
            JkInvariant::R => Invariant::R,
            JkInvariant::B => Invariant::B,
            JkInvariant::D => Invariant::D,
        }
    }
}

/// A loaded problem together with its invariant engine.
pub struct JkProblem {
    problem: ProblemFile,
    kcc: KccSystem,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> JkStatus {
    match jetkcc::cli::exit_code(e) {
        1 => JkStatus::CheckFailed,
        3 => JkStatus::Numeric,
        _ => JkStatus::InvalidInput,
    }
}

fn guard(f: impl FnOnce() -> Result<(), JkStatus>) -> JkStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => JkStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            JkStatus::Panic
        }
    }
}

fn fail(e: Error) -> JkStatus {
    set_error(e.to_string());
    status_of(&e)
}

unsafe fn c_str<'a>(s: *const c_char) -> Result<&'a str, JkStatus> {
    if s.is_null() {
        set_error("null string argument");
        return Err(JkStatus::NullPointer);
    }
    CStr::from_ptr(s).to_str().map_err(|e| {
        set_error(format!("argument is not UTF-8: {e}"));
        JkStatus::InvalidInput
    })
}

fn non_null<T>(p: *const T) -> Result<(), JkStatus> {
    if p.is_null() {
        set_error("null pointer argument");
        Err(JkStatus::NullPointer)
    } else {
        Ok(())
    }
}

fn finish(problem: ProblemFile, out: *mut *mut JkProblem) -> Result<(), JkStatus> {
    let kcc = KccSystem::new(
        problem.system.clone(),
        MetricGeometry::new(problem.temporal_metric.clone()),
    )
    .map_err(fail)?;
    unsafe { *out = Box::into_raw(Box::new(JkProblem { problem, kcc })) };
    Ok(())
}

/// Message for the last failure on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn jk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn jk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a problem file from `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jk_problem_load(path: *const c_char, out: *mut *mut JkProblem) -> JkStatus {
    guard(|| {
        non_null(out)?;
        let path = c_str(path)?;
        let p = ProblemFile::load(Path::new(path)).map_err(fail)?;
        finish(p, out)
    })
}

/// Parses a problem from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jk_problem_from_json(json: *const c_char, out: *mut *mut JkProblem) -> JkStatus {
    guard(|| {
        non_null(out)?;
        let text = c_str(json)?;
        let p = ProblemFile::parse(text).map_err(fail)?;
        finish(p, out)
    })
}

/// Releases a problem handle. NULL is ignored.
///
/// # Safety
/// `p` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn jk_problem_free(p: *mut JkProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Writes the temporal and spatial dimensions.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn jk_problem_dims(p: *const JkProblem, m: *mut usize, n: *mut usize) -> JkStatus {
    guard(|| {
        non_null(p)?;
        non_null(m)?;
        non_null(n)?;
        let d = (*p).problem.dims;
        *m = d.m;
        *n = d.n;
        Ok(())
    })
}

/// Number of components of an invariant for this problem.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn jk_invariant_len(p: *const JkProblem, which: JkInvariant, len: *mut usize) -> JkStatus {
    guard(|| {
        non_null(p)?;
        non_null(len)?;
        let shape = Invariant::from(which).signature().shape((*p).problem.dims);
        *len = shape.iter().product();
        Ok(())
    })
}

/// Evaluates an invariant at the jet point `(t[m], x[n], v[n*m])`, with `v`
/// row-major by spatial index. Components are written row-major into `out`.
///
/// # Safety
/// `t`, `x`, `v` must hold `m`, `n` and `n*m` values; `out` must hold
/// `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn jk_evaluate_invariant(
    p: *const JkProblem,
    which: JkInvariant,
    t: *const f64,
    x: *const f64,
    v: *const f64,
    out: *mut f64,
    out_len: usize,
) -> JkStatus {
    guard(|| {
        non_null(p)?;
        non_null(t)?;
        non_null(x)?;
        non_null(v)?;
        non_null(out)?;
        let p = &*p;
        let dims = p.problem.dims;
        let t = std::slice::from_raw_parts(t, dims.m).to_vec();
        let x = std::slice::from_raw_parts(x, dims.n).to_vec();
        let flat = std::slice::from_raw_parts(v, dims.n * dims.m);
        let v = flat.chunks(dims.m).map(<[f64]>::to_vec).collect();
        let point = JetPoint::new(dims, t, x, v).map_err(fail)?;
        let val = p.kcc.evaluate(which.into(), &point).map_err(fail)?;
        let data = val.values.data();
        if out_len < data.len() {
            set_error(format!("output buffer holds {out_len} values, {} needed", data.len()));
            return Err(JkStatus::BufferTooSmall);
        }
        std::slice::from_raw_parts_mut(out, data.len()).copy_from_slice(data);
        Ok(())
    })
}

/// Renders the invariants report for `samples` points drawn with `seed`
/// (or the problem's own points). Free the string with [`jk_string_free`].
///
/// # Safety
/// `p` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn jk_invariants_report(
    p: *const JkProblem,
    samples: usize,
    seed: u64,
    out: *mut *mut c_char,
) -> JkStatus {
    guard(|| {
        non_null(p)?;
        non_null(out)?;
        let opts = SampleOptions { samples, seed };
        let report = run_invariants(&(*p).problem, &Invariant::ALL, None, &opts).map_err(fail)?;
        let s = CString::new(report.render()).map_err(|_| JkStatus::Panic)?;
        *out = s.into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn jk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Null-space dimension of the `S` constraint system for the constant
/// temporal metric `h` (row-major `m*m`).
///
/// # Safety
/// `h` must hold `m*m` values and `dim` must be valid.
#[no_mangle]
pub unsafe extern "C" fn jk_nullspace_dimension(h: *const f64, m: usize, dim: *mut usize) -> JkStatus {
    guard(|| {
        non_null(h)?;
        non_null(dim)?;
        if m == 0 || m > jetkcc::exprlang::MAX_DIM {
            set_error(format!("m = {m} outside 1..=4"));
            return Err(JkStatus::InvalidInput);
        }
        let vals = std::slice::from_raw_parts(h, m * m);
        let rows = (0..m).map(|a| (0..m).map(|b| Expr::num(vals[a * m + b])).collect()).collect();
        let field = MetricField::new(MetricKind::Temporal, rows).map_err(fail)?;
        let ns = star_star_nullspace(&field, &vec![0.0; m], m).map_err(fail)?;
        *dim = ns.dimension;
        Ok(())
    })
}

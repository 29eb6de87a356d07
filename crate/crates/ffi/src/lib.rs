//! C interface to `securefilter`.
//!
//! Every function returns an [`SsfStatus`]; on anything other than
//! `SSF_STATUS_OK` a description is available from [`ssf_last_error`] on the
//! same thread. Matrices are passed row-major. Filters are opaque handles
//! created by `ssf_filter_new_*` and released with [`ssf_filter_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::fs::{self, File};
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use securefilter::filter::{DeltaBound, FilterMode};
use securefilter::harness::{load_config, run_scenario_with, summarize, write_trace, ConfigError, RunOptions};
use securefilter::model::drone_model;
use securefilter::nalgebra::{DMatrix, DVector};
use securefilter::optim::{solve_inf_norm_fit, solve_projection_qp, QpStatus};
use securefilter::{Error, LinearSystem, SafetySpec, SecureFilter, SsrConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    DimensionMismatch = 3,
    Numerical = 4,
    ConfigParse = 5,
    ConfigInvalid = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsfMode {
    Nominal = 0,
    Filtered = 1,
    Fallback = 2,
}

/// Opaque secure filter handle.
pub struct SsfFilter {
    inner: SecureFilter,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Fail(SsfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidParameter(_) => SsfStatus::InvalidParameter,
            Error::DimensionMismatch(_) => SsfStatus::DimensionMismatch,
            Error::Numerical(_) => SsfStatus::Numerical,
        };
        Fail(status, e.to_string())
    }
}

impl From<ConfigError> for Fail {
    fn from(e: ConfigError) -> Self {
        let status = match e {
            ConfigError::Io { .. } => SsfStatus::Io,
            ConfigError::Parse(_) => SsfStatus::ConfigParse,
            ConfigError::Validation(_) => SsfStatus::ConfigInvalid,
        };
        Fail(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SsfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SsfStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SsfStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(SsfStatus::NullPointer, format!("{what} is null"))
}

/// Borrows `len` doubles; a null pointer is accepted only when `len == 0`.
unsafe fn doubles<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn doubles_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn path<'a>(p: *const c_char, what: &str) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| Fail(SsfStatus::InvalidParameter, format!("{what} is not valid UTF-8")))
}

unsafe fn matrix(p: *const f64, rows: usize, cols: usize, what: &str) -> Result<DMatrix<f64>, Fail> {
    Ok(DMatrix::from_row_slice(rows, cols, doubles(p, rows * cols, what)?))
}

unsafe fn store_handle(out: *mut *mut SsfFilter, inner: SecureFilter) -> Result<(), Fail> {
    *out = Box::into_raw(Box::new(SsfFilter { inner }));
    Ok(())
}

/// Message for the most recent failed call on this thread, or an empty
/// string. The pointer stays valid until the next call into this library
/// from the same thread.
#[no_mangle]
pub extern "C" fn ssf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ssf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Secure filter for the reduced-order drone model with the duplicated
/// 8-sensor output map and an axis-aligned geofence.
///
/// `bounds` holds `x1_lo, x1_hi, x2_lo, x2_hi`.
///
/// # Safety
/// `bounds` must point to 4 doubles and `out` to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn ssf_filter_new_drone(
    tau_s: f64,
    ts: f64,
    l: usize,
    s: usize,
    d_max: f64,
    gamma: f64,
    bounds: *const f64,
    out: *mut *mut SsfFilter,
) -> SsfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let b = doubles(bounds, 4, "bounds")?;
        let sys = drone_model(tau_s, ts)?;
        let spec = SafetySpec::axis_box(4, &[(0, [b[0], b[1]]), (2, [b[2], b[3]])], gamma)?;
        store_handle(out, SecureFilter::new(sys, spec, SsrConfig { s, l, d_max })?)
    })
}

/// Secure filter for a general system `x⁺ = Ax + Bu`, `y = Cx` with safe set
/// `{x : Hx + q ≥ 0}`. `a` is n×n, `b` n×m, `c` p×n, `h` r×n, `q` length r.
///
/// # Safety
/// Every pointer must reference at least as many doubles as its shape
/// implies, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssf_filter_new_linear(
    n: usize,
    m: usize,
    p: usize,
    a: *const f64,
    b: *const f64,
    c: *const f64,
    ts: f64,
    r: usize,
    h: *const f64,
    q: *const f64,
    gamma: f64,
    l: usize,
    s: usize,
    d_max: f64,
    out: *mut *mut SsfFilter,
) -> SsfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let sys = LinearSystem::new(matrix(a, n, n, "a")?, matrix(b, n, m, "b")?, matrix(c, p, n, "c")?, ts)?;
        let spec = SafetySpec::new(matrix(h, r, n, "h")?, DVector::from_row_slice(doubles(q, r, "q")?), gamma)?;
        store_handle(out, SecureFilter::new(sys, spec, SsrConfig { s, l, d_max })?)
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `filter` must come from `ssf_filter_new_*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ssf_filter_free(filter: *mut SsfFilter) {
    if !filter.is_null() {
        drop(Box::from_raw(filter));
    }
}

/// Uses the per-row bound instead of the matrix-norm bound when `per_row` is nonzero.
///
/// # Safety
/// `filter` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssf_filter_set_per_row_bound(filter: *mut SsfFilter, per_row: c_int) -> SsfStatus {
    guard(|| {
        let f = filter.as_mut().ok_or_else(|| null("filter"))?;
        let bound = if per_row != 0 { DeltaBound::PerRow } else { DeltaBound::MatrixNorm };
        f.inner = f.inner.clone().with_delta_bound(bound);
        Ok(())
    })
}

/// Appends the measurement `y` (length p) to the data window.
///
/// # Safety
/// `filter` must be a live handle and `y` must point to `p` doubles.
#[no_mangle]
pub unsafe extern "C" fn ssf_filter_observe(filter: *mut SsfFilter, y: *const f64, p: usize) -> SsfStatus {
    guard(|| {
        let f = filter.as_mut().ok_or_else(|| null("filter"))?;
        f.inner.observe(DVector::from_row_slice(doubles(y, p, "y")?))?;
        Ok(())
    })
}

/// Filters `u_nom` (length m) into `u_safe`. `mode` and `ball_count` may be null.
///
/// # Safety
/// `filter` must be a live handle; `u_nom` and `u_safe` must point to `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn ssf_filter_step(
    filter: *mut SsfFilter,
    u_nom: *const f64,
    m: usize,
    u_safe: *mut f64,
    mode: *mut SsfMode,
    ball_count: *mut usize,
) -> SsfStatus {
    guard(|| {
        let f = filter.as_mut().ok_or_else(|| null("filter"))?;
        let u = DVector::from_row_slice(doubles(u_nom, m, "u_nom")?);
        let out = doubles_mut(u_safe, m, "u_safe")?;
        let step = f.inner.filter(&u)?;
        out.copy_from_slice(step.outcome.u_safe.as_slice());
        if let Some(md) = mode.as_mut() {
            *md = match step.outcome.mode {
                FilterMode::NominalPassed => SsfMode::Nominal,
                FilterMode::Filtered => SsfMode::Filtered,
                FilterMode::Fallback => SsfMode::Fallback,
            };
        }
        if let Some(bc) = ball_count.as_mut() {
            *bc = step.balls.len();
        }
        Ok(())
    })
}

/// Empties the data window.
///
/// # Safety
/// `filter` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ssf_filter_reset(filter: *mut SsfFilter) -> SsfStatus {
    guard(|| {
        filter.as_mut().ok_or_else(|| null("filter"))?.inner.reset();
        Ok(())
    })
}

/// `x = argmin ‖Ox − Y‖∞` for a k×n matrix `o`. Writes n entries to `x` and
/// the optimal residual to `d_lower`.
///
/// # Safety
/// `o` must point to k·n doubles, `y` to k, `x` to n; `d_lower` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssf_inf_norm_fit(
    o: *const f64,
    k: usize,
    n: usize,
    y: *const f64,
    x: *mut f64,
    d_lower: *mut f64,
) -> SsfStatus {
    guard(|| {
        let om = matrix(o, k, n, "o")?;
        let yv = DVector::from_row_slice(doubles(y, k, "y")?);
        let xs = doubles_mut(x, n, "x")?;
        let d = d_lower.as_mut().ok_or_else(|| null("d_lower"))?;
        let fit = solve_inf_norm_fit(&om, &yv)?;
        xs.copy_from_slice(fit.x.as_slice());
        *d = fit.d_lower;
        Ok(())
    })
}

/// Projects `u_nom` (length m) onto `{u : Gu ≥ h}` with `g` c×m. Sets
/// `*feasible` to 0 and leaves `u` untouched when the set is empty.
///
/// # Safety
/// `u_nom` and `u` must point to m doubles, `g` to c·m, `h` to c; `feasible` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssf_projection_qp(
    u_nom: *const f64,
    m: usize,
    g: *const f64,
    h: *const f64,
    c: usize,
    u: *mut f64,
    feasible: *mut c_int,
) -> SsfStatus {
    guard(|| {
        let un = DVector::from_row_slice(doubles(u_nom, m, "u_nom")?);
        let gm = matrix(g, c, m, "g")?;
        let hv = DVector::from_row_slice(doubles(h, c, "h")?);
        let us = doubles_mut(u, m, "u")?;
        let flag = feasible.as_mut().ok_or_else(|| null("feasible"))?;
        let r = solve_projection_qp(&un, &gm, &hv)?;
        *flag = c_int::from(r.status == QpStatus::Optimal);
        if r.status == QpStatus::Optimal {
            us.copy_from_slice(r.u.as_slice());
        }
        Ok(())
    })
}

/// Runs a scenario file and writes `trace.csv` and `summary.json` into
/// `out_dir`, which is created if needed.
///
/// # Safety
/// Both paths must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn ssf_scenario_run(
    config_path: *const c_char,
    out_dir: *const c_char,
    record_timing: c_int,
) -> SsfStatus {
    guard(|| {
        let cfg = load_config(path(config_path, "config_path")?)?;
        let dir = path(out_dir, "out_dir")?;
        let trace = run_scenario_with(&cfg, RunOptions { record_timing: record_timing != 0 })?;
        let summary = summarize(&trace)?;
        let io = |e: std::io::Error| Fail(SsfStatus::Io, format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        write_trace(BufWriter::new(File::create(dir.join("trace.csv")).map_err(io)?), &trace)?;
        let json = serde_json::to_string_pretty(&summary).map_err(|e| Fail(SsfStatus::Io, e.to_string()))?;
        fs::write(dir.join("summary.json"), json + "\n").map_err(io)?;
        Ok(())
    })
}

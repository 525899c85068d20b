//! C interface to `lorenz-lab`.
//!
//! Every fallible function returns an [`LlStatus`] and writes results through
//! out-pointers. On failure the message is kept per thread and can be copied
//! out with [`ll_last_error_message`]. Handles are opaque and must be released
//! with their matching `_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use lorenz_lab::agents::{transact, Conservation};
use lorenz_lab::analytic::{gaussian_lorenz, heat_lorenz_curve};
use lorenz_lab::harness::{load_config, run_experiment};
use lorenz_lab::lorenz_core::{gini_from_lorenz, Domain, LorenzCurve};
use lorenz_lab::Error;

/// Result code of every fallible call. `LL_STATUS_OK` is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Numerical = 3,
    Config = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Domain tag of a Lorenz curve.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LlDomain {
    RealLine = 0,
    PositiveHalfLine = 1,
}

/// How [`ll_transact`] conserved the pair total.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LlConservation {
    Exact = 0,
    Rounded = 1,
    Skipped = 2,
}

/// Opaque sampled Lorenz curve.
pub struct LlCurve(LorenzCurve);

/// Opaque record of a finished experiment run.
pub struct LlRun {
    manifest: CString,
    file_count: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    // Interior NULs cannot occur in our messages; replace defensively.
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> LlStatus {
    match e {
        Error::Config { .. } => LlStatus::Config,
        Error::Io { .. } => LlStatus::Io,
        e if e.is_numerical() => LlStatus::Numerical,
        _ => LlStatus::InvalidInput,
    }
}

/// Runs `body`, mapping errors and panics to a status and recording the message.
fn guard(body: impl FnOnce() -> Result<(), LlStatusError>) -> LlStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => LlStatus::Ok,
        Ok(Err(LlStatusError(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            LlStatus::Panic
        }
    }
}

struct LlStatusError(LlStatus, String);

impl From<Error> for LlStatusError {
    fn from(e: Error) -> Self {
        LlStatusError(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> LlStatusError {
    LlStatusError(LlStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` is null or valid for writes of `T`.
unsafe fn write_out<T>(p: *mut T, what: &str, value: T) -> Result<(), LlStatusError> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

/// # Safety
/// `p` is null or a NUL-terminated string valid for the call.
unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, LlStatusError> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| LlStatusError(LlStatus::InvalidInput, format!("{what} is not UTF-8")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ll_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf`, NUL-terminated
/// and truncated to `len - 1` bytes. Returns the full message length without
/// the terminator, or 0 when the last call succeeded.
///
/// # Safety
/// `buf` is null or valid for `len` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn ll_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Gaussian Lorenz curve value at `f` for the given mean and standard deviation.
///
/// # Safety
/// `out` is valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn ll_gaussian_lorenz(f: f64, mean: f64, std: f64, out: *mut f64) -> LlStatus {
    guard(|| write_out(out, "out", gaussian_lorenz(f, mean, std)?))
}

/// Heat-equation Lorenz curve on `count` uniform `f` nodes at time `t`,
/// started from a point mass at `a`.
///
/// # Safety
/// `out` is valid for one pointer write. On success `*out` owns a handle.
#[no_mangle]
pub unsafe extern "C" fn ll_curve_heat(
    count: usize,
    t: f64,
    diffusion: f64,
    a: f64,
    out: *mut *mut LlCurve,
) -> LlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let curve = heat_lorenz_curve(count, t, diffusion, a)?;
        out.write(Box::into_raw(Box::new(LlCurve(curve))));
        Ok(())
    })
}

/// Curve from `len` values on uniform `f` nodes. The values are copied.
///
/// # Safety
/// `values` is valid for `len` reads; `out` for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn ll_curve_from_values(
    values: *const f64,
    len: usize,
    time: f64,
    domain: LlDomain,
    out: *mut *mut LlCurve,
) -> LlStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let v = std::slice::from_raw_parts(values, len).to_vec();
        let domain = match domain {
            LlDomain::RealLine => Domain::RealLine,
            LlDomain::PositiveHalfLine => Domain::PositiveHalfLine,
        };
        let curve = LorenzCurve::new(v, time, domain)?;
        out.write(Box::into_raw(Box::new(LlCurve(curve))));
        Ok(())
    })
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `curve` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ll_curve_len(curve: *const LlCurve) -> usize {
    curve.as_ref().map_or(0, |c| c.0.len())
}

/// Copies the node values into `buf`, which must hold at least
/// [`ll_curve_len`] doubles.
///
/// # Safety
/// `curve` is a live handle; `buf` is valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ll_curve_values(curve: *const LlCurve, buf: *mut f64, len: usize) -> LlStatus {
    guard(|| {
        let c = curve.as_ref().ok_or_else(|| null("curve"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let v = c.0.values();
        if len < v.len() {
            return Err(LlStatusError(
                LlStatus::BufferTooSmall,
                format!("buffer holds {len} values, curve has {}", v.len()),
            ));
        }
        std::ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        Ok(())
    })
}

/// Gini coefficient of a positive-half-line curve.
///
/// # Safety
/// `curve` is a live handle; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ll_curve_gini(curve: *const LlCurve, out: *mut f64) -> LlStatus {
    guard(|| {
        let c = curve.as_ref().ok_or_else(|| null("curve"))?;
        write_out(out, "out", gini_from_lorenz(&c.0)?)
    })
}

/// Releases a curve. Null is ignored.
///
/// # Safety
/// `curve` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ll_curve_free(curve: *mut LlCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// One yard-sale exchange between wealths `wi` and `wj`. The f64 sum of the
/// pair is preserved bit for bit.
///
/// # Safety
/// Each out-pointer is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ll_transact(
    wi: f64,
    wj: f64,
    gamma: f64,
    i_wins: bool,
    out_wi: *mut f64,
    out_wj: *mut f64,
    out_tier: *mut LlConservation,
) -> LlStatus {
    guard(|| {
        if out_wi.is_null() || out_wj.is_null() || out_tier.is_null() {
            return Err(null("output pointer"));
        }
        let (a, b, tier) = transact(wi, wj, gamma, i_wins)?;
        out_wi.write(a);
        out_wj.write(b);
        out_tier.write(match tier {
            Conservation::Exact => LlConservation::Exact,
            Conservation::Rounded => LlConservation::Rounded,
            Conservation::Skipped => LlConservation::Skipped,
        });
        Ok(())
    })
}

/// Loads a TOML experiment file, runs it and writes artifacts under
/// `out_dir`, or under the directory named in the file when `out_dir` is null.
///
/// # Safety
/// `config_path` is a NUL-terminated string; `out_dir` is null or one;
/// `out` is valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn ll_run_config(
    config_path: *const c_char,
    out_dir: *const c_char,
    out: *mut *mut LlRun,
) -> LlStatus {
    guard(|| {
        let path = read_str(config_path, "config_path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut config = load_config(Path::new(path))?;
        if !out_dir.is_null() {
            config.output.dir = read_str(out_dir, "out_dir")?.into();
        }
        let dir = config.output.dir.clone();
        let outcome = run_experiment(&config, &dir)?;
        let json = serde_json::to_string(&outcome.manifest).map_err(Error::from)?;
        let run = LlRun {
            manifest: CString::new(json).map_err(|_| null("manifest"))?,
            file_count: outcome.manifest.files.len(),
        };
        out.write(Box::into_raw(Box::new(run)));
        Ok(())
    })
}

/// Manifest of a run as compact JSON. The string lives as long as the handle.
///
/// # Safety
/// `run` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ll_run_manifest_json(run: *const LlRun) -> *const c_char {
    run.as_ref().map_or(std::ptr::null(), |r| r.manifest.as_ptr())
}

/// Number of indexed artifacts the run wrote, or 0 for a null handle.
///
/// # Safety
/// `run` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ll_run_file_count(run: *const LlRun) -> usize {
    run.as_ref().map_or(0, |r| r.file_count)
}

/// Releases a run. Null is ignored.
///
/// # Safety
/// `run` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ll_run_free(run: *mut LlRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

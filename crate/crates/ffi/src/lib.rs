//! C interface to `fracruin`.
//!
//! A model is created with [`fr_model_new`] and released with
//! [`fr_model_free`]. Every other call returns an [`FrStatus`]; on failure the
//! message is available from [`fr_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use fracruin::estimation::{sigma_confidence, ScalingMode};
use fracruin::fbm::ModelParams;
use fracruin::grid::GridFunction;
use fracruin::ruin::{finite_diff_sens, mc_ruin, FdScheme};
use fracruin::sensitivity::{malliavin_sens, MalliavinConfig};
use fracruin::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Config = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

/// A point estimate with its standard error (or asymptotic sd).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrEstimate {
    pub value: f64,
    pub se: f64,
}

/// Opaque model handle.
pub struct FrModel {
    params: ModelParams,
    horizon: f64,
    workers: Option<usize>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> FrStatus {
    match e {
        Error::Domain(_) | Error::Usage(_) => FrStatus::Domain,
        Error::Config(_) => FrStatus::Config,
        Error::Sampler(_) | Error::Numerical(_) => FrStatus::Numerical,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => FrStatus::Io,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (FrStatus, String)>) -> FrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            FrStatus::Ok
        }
        Ok(Err((s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            FrStatus::Panic
        }
    }
}

fn lib<T>(r: fracruin::Result<T>) -> Result<T, (FrStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (FrStatus, String) {
    (FrStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `model` must be null or a live handle from [`fr_model_new`].
unsafe fn model_ref<'a>(model: *const FrModel) -> Result<&'a FrModel, (FrStatus, String)> {
    model.as_ref().ok_or_else(|| null("model"))
}

/// Creates a model X = u + σθt − σW^H on [0, horizon].
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn fr_model_new(
    u: f64,
    theta: f64,
    sigma: f64,
    hurst: f64,
    horizon: f64,
    out: *mut *mut FrModel,
) -> FrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params = lib(ModelParams::new(u, theta, sigma, hurst))?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err((FrStatus::Domain, format!("horizon must be positive, got {horizon}")));
        }
        *out = Box::into_raw(Box::new(FrModel { params, horizon, workers: None }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle from [`fr_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fr_model_free(model: *mut FrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Caps the worker threads used by this model (0 means the global pool).
/// Results do not depend on it.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fr_model_set_workers(model: *mut FrModel, workers: usize) -> FrStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        m.workers = (workers > 0).then_some(workers);
        Ok(())
    })
}

/// Monte Carlo ruin probability on an n-step grid.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn fr_ruin_probability(
    model: *const FrModel,
    paths: usize,
    steps: usize,
    seed: u64,
    out: *mut FrEstimate,
) -> FrStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = lib(mc_ruin(&m.params, m.horizon, paths, steps, seed, m.workers))?;
        *out = FrEstimate { value: r.psi_hat, se: r.se };
        Ok(())
    })
}

/// Central finite difference of the ruin probability in σ with common random numbers.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn fr_sens_finite_diff(
    model: *const FrModel,
    eps: f64,
    paths: usize,
    steps: usize,
    seed: u64,
    out: *mut FrEstimate,
) -> FrStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = lib(finite_diff_sens(&m.params, m.horizon, eps, FdScheme::Central, true, paths, steps, seed, m.workers))?;
        *out = FrEstimate { value: s.value, se: s.se };
        Ok(())
    })
}

/// Malliavin-weight estimate of ∂Ψ/∂σ with the default dominating-process
/// exponents for the model's H. `sharpness` ≤ 0 selects the default.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn fr_sens_malliavin(
    model: *const FrModel,
    sharpness: f64,
    paths: usize,
    steps: usize,
    seed: u64,
    out: *mut FrEstimate,
) -> FrStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let mut cfg = MalliavinConfig::for_hurst(m.params.h);
        if sharpness > 0.0 {
            cfg.sharpness = sharpness;
        }
        let s = lib(malliavin_sens(&m.params, m.horizon, paths, steps, &cfg, seed, m.workers))?;
        *out = FrEstimate { value: s.value, se: s.se };
        Ok(())
    })
}

/// σ̂ from surplus observations `x` at times `t` (equally spaced from 0),
/// with its asymptotic sd in `se` (NaN when H ≥ 3/4).
///
/// # Safety
/// `t` and `x` must point to `len` readable values and `out` be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn fr_sigma_hat(
    t: *const f64,
    x: *const f64,
    len: usize,
    p: f64,
    hurst: f64,
    out: *mut FrEstimate,
) -> FrStatus {
    guard(|| {
        if t.is_null() || x.is_null() {
            return Err(null("data"));
        }
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let (t, x) = (std::slice::from_raw_parts(t, len), std::slice::from_raw_parts(x, len));
        let data = lib(GridFunction::from_samples(t, x))?;
        let est = lib(sigma_confidence(&data, p, hurst, 0.05, ScalingMode::default()))?;
        *out = FrEstimate { value: est.sigma_hat, se: est.sd.unwrap_or(f64::NAN) };
        Ok(())
    })
}

/// Message of the last failed call on this thread ("" after a success).
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn fr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fr_version() -> *const c_char {
    static V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(c) => c,
        Err(_) => panic!("version string"),
    };
    V.as_ptr()
}

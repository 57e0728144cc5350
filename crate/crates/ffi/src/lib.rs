//! C ABI for `dlreg`.
//!
//! Every function returns a [`DlregStatus`]. On failure a message describing
//! the error is kept per thread and can be read with
//! [`dlreg_last_error_message`]. Handles are opaque and must be released with
//! the matching `_free` function. Panics never cross the boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dlreg::data::{AuxKind, AuxScale, Link, Transform, VarianceMethod, WorkingVariance};
use dlreg::numerics::{DenseMatrix, RootSolveOptions};
use dlreg::primary::{fit, wald_test, PrimaryFit};
use dlreg::simulation::{run_mc, ScenarioFile};
use dlreg::{Dataset, Error, FitConfig};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlregStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    InvalidData = 4,
    NotConverged = 5,
    Numerical = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlregLink {
    Identity = 0,
    Logit = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlregAuxiliary {
    /// Normal model for the covariate given the surrogates.
    Parametric = 0,
    /// Rank-based accelerated failure time model with a Kaplan-Meier residual law.
    Semiparametric = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlregAuxScale {
    Linear = 0,
    Log = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlregTransform {
    Negate = 0,
    NegExp = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DlregVariance {
    KnownEta = 0,
    Corrected = 1,
    CrossFit = 2,
}

/// Fit settings; start from [`dlreg_fit_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DlregFitOptions {
    pub link: DlregLink,
    pub auxiliary: DlregAuxiliary,
    pub aux_scale: DlregAuxScale,
    /// Required by the semiparametric auxiliary model.
    pub transform: DlregTransform,
    pub variance: DlregVariance,
    /// NaN keeps the default truncation point.
    pub tau: f64,
    pub normalize_htilde: bool,
    pub seed: u64,
}

/// Opaque dataset handle.
pub struct DlregDataset {
    inner: Dataset,
}

/// Opaque fit handle.
pub struct DlregFit {
    inner: PrimaryFit,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn status_of(e: &Error) -> DlregStatus {
    match e {
        _ if e.is_io() => DlregStatus::Io,
        Error::Config(_) | Error::Dimension(_) | Error::Domain(_) | Error::AuxKind(_) => {
            DlregStatus::InvalidArgument
        }
        Error::InvalidDataset(_) | Error::NoObservedX | Error::MissingTruth => {
            DlregStatus::InvalidData
        }
        Error::NoConvergence { .. } | Error::AuxNotConverged | Error::GeeNotConverged => {
            DlregStatus::NotConverged
        }
        _ => DlregStatus::Numerical,
    }
}

/// Runs `f`, recording the message of any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (DlregStatus, String)>) -> DlregStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DlregStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DlregStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (DlregStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (DlregStatus, String) {
    (DlregStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(
    p: *const f64,
    len: usize,
    what: &str,
) -> Result<&'a [f64], (DlregStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (DlregStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (DlregStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("nul bytes removed")
        .into_raw()
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dlreg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds a dataset from per-row arrays.
///
/// `u` is `n × p_u` and `z` is `n × p_z`, both row-major. `observed` may be
/// null, in which case a row counts as observed when `x > delta`; otherwise it
/// holds one 0/1 flag per row and the value of `x` on flagged-censored rows is
/// ignored.
///
/// # Safety
/// `y` and `x` must point to `n` doubles, `u` to `n * p_u`, `z` to `n * p_z`,
/// `observed` (if not null) to `n` bytes, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dlreg_dataset_new(
    n: usize,
    y: *const f64,
    x: *const f64,
    observed: *const u8,
    p_u: usize,
    u: *const f64,
    p_z: usize,
    z: *const f64,
    delta: f64,
    out: *mut *mut DlregDataset,
) -> DlregStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let y = slice(y, n, "y")?.to_vec();
        let x = slice(x, n, "x")?.to_vec();
        let u = DenseMatrix::from_row_major(n, p_u, slice(u, n * p_u, "u")?.to_vec())
            .map_err(lib_err)?;
        let z = DenseMatrix::from_row_major(n, p_z, slice(z, n * p_z, "z")?.to_vec())
            .map_err(lib_err)?;
        let mut d = Dataset::from_values(y, x, u, z, delta).map_err(lib_err)?;
        if !observed.is_null() && n > 0 {
            let flags = std::slice::from_raw_parts(observed, n);
            d.x_observed = flags.iter().map(|&f| f != 0).collect();
        }
        *out = Box::into_raw(Box::new(DlregDataset { inner: d }));
        Ok(())
    })
}

/// # Safety
/// `d` must come from [`dlreg_dataset_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn dlreg_dataset_free(d: *mut DlregDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Number of rows whose covariate is above the detection limit.
///
/// # Safety
/// `d` must be a live dataset handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dlreg_dataset_n_observed(
    d: *const DlregDataset,
    out: *mut usize,
) -> DlregStatus {
    guard(|| {
        let d = d.as_ref().ok_or_else(|| null("dataset"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = d.inner.n_obs();
        Ok(())
    })
}

/// Default settings: identity link, parametric auxiliary model on the linear
/// scale, corrected sandwich variance.
#[no_mangle]
pub extern "C" fn dlreg_fit_options_default() -> DlregFitOptions {
    DlregFitOptions {
        link: DlregLink::Identity,
        auxiliary: DlregAuxiliary::Parametric,
        aux_scale: DlregAuxScale::Linear,
        transform: DlregTransform::Negate,
        variance: DlregVariance::Corrected,
        tau: f64::NAN,
        normalize_htilde: true,
        seed: 0,
    }
}

fn config(o: &DlregFitOptions) -> FitConfig {
    let link = match o.link {
        DlregLink::Identity => Link::Identity,
        DlregLink::Logit => Link::Logit,
    };
    FitConfig {
        link,
        working_variance: match link {
            Link::Identity => WorkingVariance::Constant,
            Link::Logit => WorkingVariance::Bernoulli,
        },
        auxiliary: match o.auxiliary {
            DlregAuxiliary::Parametric => AuxKind::ParametricNormal,
            DlregAuxiliary::Semiparametric => AuxKind::SemiparametricAft,
        },
        aux_scale: match o.aux_scale {
            DlregAuxScale::Linear => AuxScale::Linear,
            DlregAuxScale::Log => AuxScale::Log,
        },
        transform: Some(match o.transform {
            DlregTransform::Negate => Transform::Negate,
            DlregTransform::NegExp => Transform::NegExp,
        }),
        tau_override: (!o.tau.is_nan()).then_some(o.tau),
        normalize_htilde: o.normalize_htilde,
        variance: match o.variance {
            DlregVariance::KnownEta => VarianceMethod::KnownEta,
            DlregVariance::Corrected => VarianceMethod::Theorem1,
            DlregVariance::CrossFit => VarianceMethod::Sscf,
        },
        seed: o.seed,
    }
}

/// Fits the auxiliary model and the primary regression.
///
/// # Safety
/// `d` must be a live dataset handle, `options` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dlreg_fit(
    d: *const DlregDataset,
    options: *const DlregFitOptions,
    out: *mut *mut DlregFit,
) -> DlregStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let d = d.as_ref().ok_or_else(|| null("dataset"))?;
        let o = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| dlreg_fit_options_default());
        let f = fit(&d.inner, &config(&o), &RootSolveOptions::default()).map_err(lib_err)?;
        if !f.primary.converged {
            return Err(lib_err(Error::GeeNotConverged));
        }
        *out = Box::into_raw(Box::new(DlregFit { inner: f.primary }));
        Ok(())
    })
}

/// # Safety
/// `f` must come from [`dlreg_fit`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn dlreg_fit_free(f: *mut DlregFit) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Number of coefficients: intercept, covariate, then one per `u` column.
///
/// # Safety
/// `f` must be a live fit handle. Returns 0 for null.
#[no_mangle]
pub unsafe extern "C" fn dlreg_fit_n_coef(f: *const DlregFit) -> usize {
    f.as_ref().map_or(0, |f| f.inner.beta_hat.len())
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize) -> Result<(), (DlregStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    if len < src.len() {
        return Err((
            DlregStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    std::slice::from_raw_parts_mut(out, src.len()).copy_from_slice(src);
    Ok(())
}

/// Copies the coefficient estimates into `out`.
///
/// # Safety
/// `f` must be a live fit handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dlreg_fit_coefficients(
    f: *const DlregFit,
    out: *mut f64,
    len: usize,
) -> DlregStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("fit"))?;
        copy_out(&f.inner.beta_hat, out, len)
    })
}

/// Copies the standard errors into `out`.
///
/// # Safety
/// `f` must be a live fit handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dlreg_fit_std_errors(
    f: *const DlregFit,
    out: *mut f64,
    len: usize,
) -> DlregStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("fit"))?;
        copy_out(&f.inner.std_errors, out, len)
    })
}

/// Copies the row-major `p × p` asymptotic variance of `√n(β̂ - β)` into `out`.
///
/// # Safety
/// `f` must be a live fit handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dlreg_fit_variance(
    f: *const DlregFit,
    out: *mut f64,
    len: usize,
) -> DlregStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("fit"))?;
        copy_out(f.inner.sigma_beta.as_slice(), out, len)
    })
}

/// Wald test of `C β = b` with `C` row-major `rows × p`.
///
/// # Safety
/// `f` must be a live fit handle, `c` must hold `rows * p` doubles, `b` must
/// hold `rows` doubles, and the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dlreg_wald(
    f: *const DlregFit,
    c: *const f64,
    rows: usize,
    b: *const f64,
    statistic: *mut f64,
    p_value: *mut f64,
) -> DlregStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("fit"))?;
        let p = f.inner.beta_hat.len();
        let c = DenseMatrix::from_row_major(rows, p, slice(c, rows * p, "c")?.to_vec())
            .map_err(lib_err)?;
        let b = slice(b, rows, "b")?;
        let (stat, pv) = (
            statistic.as_mut().ok_or_else(|| null("statistic"))?,
            p_value.as_mut().ok_or_else(|| null("p_value"))?,
        );
        let w = wald_test(&f.inner, &c, b).map_err(lib_err)?;
        *stat = w.statistic;
        *pv = w.p_value;
        Ok(())
    })
}

/// Fit as JSON. Release the string with [`dlreg_string_free`].
///
/// # Safety
/// `f` must be a live fit handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dlreg_fit_to_json(
    f: *const DlregFit,
    out: *mut *mut c_char,
) -> DlregStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let f = f.as_ref().ok_or_else(|| null("fit"))?;
        *out = into_c_string(f.inner.to_json());
        Ok(())
    })
}

/// Runs a Monte Carlo scenario given as JSON (fields not given take the
/// design defaults) and returns the report as JSON. `jobs` of 0 uses every
/// core. Release the string with [`dlreg_string_free`].
///
/// # Safety
/// `scenario_json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dlreg_simulate_json(
    scenario_json: *const c_char,
    jobs: usize,
    out: *mut *mut c_char,
) -> DlregStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg = ScenarioFile::parse(text(scenario_json, "scenario_json")?, true)
            .and_then(ScenarioFile::into_config)
            .map_err(lib_err)?;
        let report = run_mc(&cfg, (jobs > 0).then_some(jobs)).map_err(lib_err)?;
        *out = into_c_string(report.to_json());
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn dlreg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

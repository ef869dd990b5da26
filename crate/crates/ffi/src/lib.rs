//! C ABI for `twoclust`.
//!
//! Datasets and fit results are opaque handles created and freed by this
//! library. Every fallible call returns a [`TcStatus`]; on failure a
//! description is available from [`tc_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use twoclust::crve::{Arity, Component, Estimates, Family};
use twoclust::dataset::{Categorical, DataError, Dataset};
use twoclust::diagnostics::{diag_panel, DiagPanel};
use twoclust::inference::{t_report, DfContext, TestResult};
use twoclust::numkernel::{student_t_pvalue, Matrix};
use twoclust::ols::{fit_ols, EstimationError};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    RankDeficient = 3,
    TooFewClusters = 4,
    EstimationFailed = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// Estimator family.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcFamily {
    Cv1 = 1,
    Cv3 = 3,
}

/// Estimator shape, in report order.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcArity {
    Hc = 0,
    OneWayI = 1,
    OneWayG = 2,
    OneWayH = 3,
    TwoTerm = 4,
    ThreeTerm = 5,
    ThreePlus = 6,
    Max = 7,
}

/// Component chosen by a max-se row.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcComponent {
    None = -1,
    ThreeTerm = 0,
    G = 1,
    H = 2,
}

/// Clustering dimension, as passed to `tc_fit_diagnostics`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcDim {
    G = 0,
    H = 1,
    I = 2,
}

/// One estimator row. Undefined quantities are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TcRow {
    pub family: TcFamily,
    pub arity: TcArity,
    pub estimate: f64,
    pub se: f64,
    pub stat: f64,
    pub p: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub df: u64,
    pub defined: bool,
    pub selected: TcComponent,
}

/// Diagnostics for one clustering dimension.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TcDiag {
    pub n_clusters: u64,
    pub size_cv: f64,
    pub leverage_cv: f64,
    pub partial_leverage_cv: f64,
    pub beta_cv: f64,
    pub gstar: f64,
}

/// Opaque dataset handle.
pub struct TcDataset(Dataset);

/// Opaque fit result handle.
pub struct TcFit {
    rows: Vec<TestResult>,
    diag: DiagPanel,
    estimate: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl ToString) {
    let c = CString::new(msg.to_string().replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: TcStatus, msg: impl ToString) -> TcStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> TcStatus) -> TcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(TcStatus::Panic, "internal panic"),
    }
}

fn data_status(e: &DataError) -> TcStatus {
    match e {
        DataError::RankDeficient { .. } => TcStatus::RankDeficient,
        _ => TcStatus::InvalidArgument,
    }
}

fn estimation_status(e: &EstimationError) -> TcStatus {
    match e {
        EstimationError::Data(d) => data_status(d),
        EstimationError::TooFewClusters { .. } => TcStatus::TooFewClusters,
        _ => TcStatus::EstimationFailed,
    }
}

/// Message for the most recent failure on this thread, or NULL. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Two-sided Student-t p-value; NaN for `df == 0`.
#[no_mangle]
pub extern "C" fn tc_student_t_pvalue(t: f64, df: u64) -> f64 {
    if df == 0 {
        return f64::NAN;
    }
    student_t_pvalue(t, df)
}

/// Builds a dataset.
///
/// `x` is row-major `n` by `k`. `g` and `h` hold one integer cluster label
/// per observation. Column `coef` is the coefficient of interest.
///
/// # Safety
/// `y`, `g` and `h` must point to `n` readable values, `x` to `n * k`, and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_dataset_new(
    y: *const f64,
    x: *const f64,
    n: usize,
    k: usize,
    g: *const i64,
    h: *const i64,
    coef: usize,
    out: *mut *mut TcDataset,
) -> TcStatus {
    guard(|| {
        if y.is_null() || x.is_null() || g.is_null() || h.is_null() || out.is_null() {
            return fail(TcStatus::NullPointer, "null argument");
        }
        let Some(nk) = n.checked_mul(k) else {
            return fail(TcStatus::InvalidArgument, "n * k overflows");
        };
        // SAFETY: the caller guarantees the lengths documented above.
        let (y, x, g, h) = unsafe {
            (
                std::slice::from_raw_parts(y, n),
                std::slice::from_raw_parts(x, nk),
                std::slice::from_raw_parts(g, n),
                std::slice::from_raw_parts(h, n),
            )
        };
        let names = (0..k).map(|c| format!("x{c}")).collect();
        let x = match Matrix::from_row_major(n, k, x.to_vec()) {
            Ok(m) => m,
            Err(e) => return fail(TcStatus::InvalidArgument, e),
        };
        let ds = Dataset::new(
            y.to_vec(),
            x,
            names,
            Categorical::from_labels(g),
            Categorical::from_labels(h),
            coef,
        );
        match ds {
            Ok(ds) => {
                // SAFETY: `out` is non-null and writable per the contract.
                unsafe { *out = Box::into_raw(Box::new(TcDataset(ds))) };
                TcStatus::Ok
            }
            Err(e) => fail(data_status(&e), e),
        }
    })
}

/// Marks columns `n_primary..k` as fixed-effect dummies, which switches the
/// jackknife to the generalized inverse.
///
/// # Safety
/// `ds` must be a live handle from [`tc_dataset_new`].
#[no_mangle]
pub unsafe extern "C" fn tc_dataset_set_fixed_effects(ds: *mut TcDataset, n_primary: usize) -> TcStatus {
    guard(|| {
        // SAFETY: non-null handles come from `tc_dataset_new`.
        let Some(handle) = (unsafe { ds.as_mut() }) else {
            return fail(TcStatus::NullPointer, "null dataset");
        };
        match handle.0.clone().with_fixed_effect_columns(n_primary) {
            Ok(d) => {
                handle.0 = d;
                TcStatus::Ok
            }
            Err(e) => fail(data_status(&e), e),
        }
    })
}

/// # Safety
/// `ds` must be NULL or a handle from [`tc_dataset_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tc_dataset_free(ds: *mut TcDataset) {
    if !ds.is_null() {
        // SAFETY: the handle was created by `Box::into_raw`.
        drop(unsafe { Box::from_raw(ds) });
    }
}

/// Fits OLS and computes all 16 estimators and the diagnostics, testing
/// `beta[coef] = null_value` with intervals at confidence `level`.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tc_fit(ds: *const TcDataset, level: f64, null_value: f64, out: *mut *mut TcFit) -> TcStatus {
    guard(|| {
        // SAFETY: non-null handles come from `tc_dataset_new`.
        let Some(handle) = (unsafe { ds.as_ref() }) else {
            return fail(TcStatus::NullPointer, "null dataset");
        };
        if out.is_null() {
            return fail(TcStatus::NullPointer, "null output");
        }
        if !(level > 0.0 && level < 1.0) {
            return fail(TcStatus::InvalidArgument, format!("level must lie in (0, 1), got {level}"));
        }
        match fit_impl(&handle.0, level, null_value) {
            Ok(fit) => {
                // SAFETY: checked non-null above.
                unsafe { *out = Box::into_raw(Box::new(fit)) };
                TcStatus::Ok
            }
            Err(e) => fail(estimation_status(&e), e),
        }
    })
}

fn fit_impl(ds: &Dataset, level: f64, null: f64) -> Result<TcFit, EstimationError> {
    let fit = fit_ols(ds)?;
    let idx = ds.cluster_indices();
    let est = Estimates::compute_with(&fit, &idx[0], &idx[1], &idx[2])?;
    let coef = ds.coef_id();
    let ctx = DfContext {
        n_obs: est.n_obs,
        n_cols: est.n_cols,
        n_g: est.n_g,
        n_h: est.n_h,
        n_i: est.n_i,
    };
    let rows = t_report(est.beta[coef], &est.menu(coef), &ctx, level, null);
    let diag = diag_panel(&fit, &est, &idx, coef)?;
    Ok(TcFit {
        rows,
        diag,
        estimate: est.beta[coef],
    })
}

/// # Safety
/// `fit` must be NULL or a handle from [`tc_fit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tc_fit_free(fit: *mut TcFit) {
    if !fit.is_null() {
        // SAFETY: the handle was created by `Box::into_raw`.
        drop(unsafe { Box::from_raw(fit) });
    }
}

/// Coefficient estimate; NaN for a NULL handle.
///
/// # Safety
/// `fit` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tc_fit_estimate(fit: *const TcFit) -> f64 {
    // SAFETY: non-null handles come from `tc_fit`.
    unsafe { fit.as_ref() }.map_or(f64::NAN, |f| f.estimate)
}

/// Number of estimator rows (16 for a live handle, 0 for NULL).
///
/// # Safety
/// `fit` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tc_fit_n_rows(fit: *const TcFit) -> usize {
    // SAFETY: non-null handles come from `tc_fit`.
    unsafe { fit.as_ref() }.map_or(0, |f| f.rows.len())
}

fn to_c_row(r: &TestResult) -> TcRow {
    let nan = f64::NAN;
    TcRow {
        family: match r.family {
            Family::Cv1 => TcFamily::Cv1,
            Family::Cv3 => TcFamily::Cv3,
        },
        arity: match r.arity {
            Arity::Hc => TcArity::Hc,
            Arity::OneWayI => TcArity::OneWayI,
            Arity::OneWayG => TcArity::OneWayG,
            Arity::OneWayH => TcArity::OneWayH,
            Arity::TwoTerm => TcArity::TwoTerm,
            Arity::ThreeTerm => TcArity::ThreeTerm,
            Arity::ThreePlus => TcArity::ThreePlus,
            Arity::Max => TcArity::Max,
        },
        estimate: r.estimate,
        se: r.se.unwrap_or(nan),
        stat: r.stat.unwrap_or(nan),
        p: r.p.unwrap_or(nan),
        ci_lo: r.ci.map_or(nan, |c| c.0),
        ci_hi: r.ci.map_or(nan, |c| c.1),
        df: r.df,
        defined: r.defined,
        selected: match r.selected {
            None => TcComponent::None,
            Some(Component::ThreeTerm) => TcComponent::ThreeTerm,
            Some(Component::G) => TcComponent::G,
            Some(Component::H) => TcComponent::H,
        },
    }
}

/// Copies row `index` (CV1 rows 0-7, then CV3 rows 8-15) into `out`.
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tc_fit_row(fit: *const TcFit, index: usize, out: *mut TcRow) -> TcStatus {
    guard(|| {
        // SAFETY: non-null handles come from `tc_fit`.
        let Some(f) = (unsafe { fit.as_ref() }) else {
            return fail(TcStatus::NullPointer, "null fit");
        };
        if out.is_null() {
            return fail(TcStatus::NullPointer, "null output");
        }
        let Some(r) = f.rows.get(index) else {
            return fail(TcStatus::OutOfRange, format!("row {index} out of range"));
        };
        // SAFETY: checked non-null above.
        unsafe { *out = to_c_row(r) };
        TcStatus::Ok
    })
}

/// Copies the diagnostics for dimension `dim` (a [`TcDim`] value) into
/// `out`.
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tc_fit_diagnostics(fit: *const TcFit, dim: u32, out: *mut TcDiag) -> TcStatus {
    guard(|| {
        // SAFETY: non-null handles come from `tc_fit`.
        let Some(f) = (unsafe { fit.as_ref() }) else {
            return fail(TcStatus::NullPointer, "null fit");
        };
        if out.is_null() {
            return fail(TcStatus::NullPointer, "null output");
        }
        let Some(d) = f.diag.dims.get(dim as usize) else {
            return fail(TcStatus::OutOfRange, format!("dimension {dim} out of range"));
        };
        // SAFETY: checked non-null above.
        unsafe {
            *out = TcDiag {
                n_clusters: d.n_clusters as u64,
                size_cv: d.size_cv,
                leverage_cv: d.leverage_cv,
                partial_leverage_cv: d.partial_leverage_cv,
                beta_cv: d.beta_cv,
                gstar: d.gstar,
            }
        };
        TcStatus::Ok
    })
}

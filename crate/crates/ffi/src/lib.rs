//! C interface to `fse-core`.
//!
//! Every function returns an [`FseStatus`]; on failure the message is
//! available from [`fse_last_error`] on the same thread. Handles are opaque
//! and released with their `*_free` function. Strings returned through
//! `char **` out-parameters are released with [`fse_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use fse_core::data::{DemandSeries, WeekKey};
use fse_core::fse::{self, ForecastMode, FseFit, StateDesign};
use fse_core::harness::{run_case, CaseConfig, CaseReport};
use fse_core::io::{load_bundle, parse_config, save_bundle, BundlePaths, DatasetBundle};
use fse_core::metrics::{self, MsaeVariant, ZeroPolicy};
use fse_core::stats::{self, Distribution, TestResult};
use fse_core::synth::{generate, make_company_shaped_spec, Shape};
use fse_core::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FseStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InsufficientData = 3,
    /// A statistical stage failed (rank deficiency, dead states, nonstationarity, ...).
    Statistical = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FseDistribution {
    Normal = 0,
    StudentT = 1,
    ChiSquared = 2,
    F = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FseMsaeVariant {
    RatioOfSums = 0,
    PaperLiteral = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FseZeroPolicy {
    Exclude = 0,
    Error = 1,
}

/// Hypothesis test outcome. `p_value` is NaN when the test has none (KPSS);
/// `approx_p_value` is NaN unless the test supplies one.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FseTestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub approx_p_value: f64,
    pub reject_at_5pct: bool,
    pub lags: usize,
    pub df: f64,
}

impl From<&TestResult> for FseTestResult {
    fn from(t: &TestResult) -> Self {
        FseTestResult {
            statistic: t.statistic,
            p_value: t.p_value.unwrap_or(f64::NAN),
            approx_p_value: t.meta.approx_p_value.unwrap_or(f64::NAN),
            reject_at_5pct: t.reject_at_5pct,
            lags: t.meta.lags.unwrap_or(0),
            df: t.meta.df.unwrap_or(f64::NAN),
        }
    }
}

/// A fitted model.
pub struct FseModel {
    fit: FseFit,
}

/// Demand, calendar, factors and optional forecasts.
pub struct FseBundle {
    bundle: DatasetBundle,
}

/// An evaluation report.
pub struct FseReport {
    report: CaseReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Null(&'static str),
    Core(Error),
    Input(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn classify(e: &Error) -> FseStatus {
    match e {
        Error::DusStep { source, .. } | Error::Stage { source, .. } => classify(source),
        Error::Io(_) => FseStatus::Io,
        Error::InsufficientData(_) => FseStatus::InsufficientData,
        Error::InvalidInput(_) | Error::Dimension(_) | Error::Domain(_) => FseStatus::InvalidInput,
        _ if e.is_input_error() => FseStatus::InvalidInput,
        _ => FseStatus::Statistical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FseStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FseStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            FseStatus::NullPointer
        }
        Ok(Err(Fail::Input(msg))) => {
            set_last_error(msg);
            FseStatus::InvalidInput
        }
        Ok(Err(Fail::Core(e))) => {
            set_last_error(e.to_string());
            classify(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            FseStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn path(p: *const c_char, what: &'static str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Input(format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn fse_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fse_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Mean absolute error of `n` forecast/actual pairs.
///
/// # Safety
/// `forecasts` and `actuals` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fse_mae(
    forecasts: *const f64,
    actuals: *const f64,
    n: usize,
    out_value: *mut f64,
) -> FseStatus {
    guard(|| {
        let v = metrics::mae(
            slice(forecasts, n, "forecasts")?,
            slice(actuals, n, "actuals")?,
        )?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// MAPE in percent.
///
/// # Safety
/// As for [`fse_mae`].
#[no_mangle]
pub unsafe extern "C" fn fse_mape(
    forecasts: *const f64,
    actuals: *const f64,
    n: usize,
    zero_policy: FseZeroPolicy,
    out_value: *mut f64,
) -> FseStatus {
    guard(|| {
        let policy = match zero_policy {
            FseZeroPolicy::Exclude => ZeroPolicy::Exclude,
            FseZeroPolicy::Error => ZeroPolicy::Error,
        };
        let v = metrics::mape(
            slice(forecasts, n, "forecasts")?,
            slice(actuals, n, "actuals")?,
            policy,
        )?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// Mean scaled absolute error.
///
/// # Safety
/// As for [`fse_mae`].
#[no_mangle]
pub unsafe extern "C" fn fse_msae(
    forecasts: *const f64,
    actuals: *const f64,
    n: usize,
    variant: FseMsaeVariant,
    out_value: *mut f64,
) -> FseStatus {
    guard(|| {
        let variant = match variant {
            FseMsaeVariant::RatioOfSums => MsaeVariant::RatioOfSums,
            FseMsaeVariant::PaperLiteral => MsaeVariant::PaperLiteral,
        };
        let v = metrics::msae(
            slice(forecasts, n, "forecasts")?,
            slice(actuals, n, "actuals")?,
            variant,
        )?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// Improvement of `candidate_error` over `benchmark_error` in whole percent.
///
/// # Safety
/// `out_pct` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fse_improvement(
    benchmark_error: f64,
    candidate_error: f64,
    out_pct: *mut i64,
) -> FseStatus {
    guard(|| {
        *out(out_pct, "out_pct")? = metrics::improvement(benchmark_error, candidate_error)?;
        Ok(())
    })
}

/// Upper-tail probability of `statistic`. `df2` is used by the F law only.
///
/// # Safety
/// `out_p` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fse_tail_probability(
    distribution: FseDistribution,
    df1: f64,
    df2: f64,
    statistic: f64,
    out_p: *mut f64,
) -> FseStatus {
    guard(|| {
        let d = match distribution {
            FseDistribution::Normal => Distribution::Normal,
            FseDistribution::StudentT => Distribution::StudentT { df: df1 },
            FseDistribution::ChiSquared => Distribution::ChiSquared { df: df1 },
            FseDistribution::F => Distribution::F { df1, df2 },
        };
        *out(out_p, "out_p")? = stats::tail_probability(d, statistic)?;
        Ok(())
    })
}

/// KPSS level-stationarity test; `lags == 0` selects the default truncation.
///
/// # Safety
/// `series` must point to `n` doubles; `out_result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fse_kpss(
    series: *const f64,
    n: usize,
    lags: usize,
    out_result: *mut FseTestResult,
) -> FseStatus {
    guard(|| {
        let t = stats::kpss_test(slice(series, n, "series")?, (lags > 0).then_some(lags))?;
        *out(out_result, "out_result")? = (&t).into();
        Ok(())
    })
}

/// Ljung-Box test; degrees of freedom are `max_lag - fitted_params`.
///
/// # Safety
/// As for [`fse_kpss`].
#[no_mangle]
pub unsafe extern "C" fn fse_ljung_box(
    residuals: *const f64,
    n: usize,
    max_lag: usize,
    fitted_params: usize,
    out_result: *mut FseTestResult,
) -> FseStatus {
    guard(|| {
        let t = stats::ljung_box(slice(residuals, n, "residuals")?, max_lag, fitted_params)?;
        *out(out_result, "out_result")? = (&t).into();
        Ok(())
    })
}

/// Jarque-Bera normality test.
///
/// # Safety
/// As for [`fse_kpss`].
#[no_mangle]
pub unsafe extern "C" fn fse_jarque_bera(
    residuals: *const f64,
    n: usize,
    out_result: *mut FseTestResult,
) -> FseStatus {
    guard(|| {
        let t = stats::normality_test(slice(residuals, n, "residuals")?)?;
        *out(out_result, "out_result")? = (&t).into();
        Ok(())
    })
}

/// `states[t]` is 0 for no event, else the active state label in `1..=m`.
fn design(states: &[i32], m: usize) -> Result<StateDesign, Fail> {
    let active = states
        .iter()
        .map(|&s| match s {
            0 => Ok(None),
            s if s > 0 => Ok(Some(s as usize)),
            s => Err(Fail::Input(format!("negative state label {s}"))),
        })
        .collect::<Result<Vec<_>, Fail>>()?;
    Ok(StateDesign::new(m, active)?)
}

unsafe fn series_and_design(
    series: *const f64,
    n: usize,
    states: *const i32,
    m: usize,
) -> Result<(DemandSeries, StateDesign), Fail> {
    let x = slice(series, n, "series")?;
    let d = if states.is_null() {
        if m != 0 {
            return Err(Fail::Null("states"));
        }
        StateDesign::empty(n)
    } else {
        design(slice(states, n, "states")?, m)?
    };
    Ok((DemandSeries::new(WeekKey::Index(1), x.to_vec())?, d))
}

/// Fit the model of order `p` with `m` states. `states` may be NULL when
/// `m == 0`.
///
/// # Safety
/// `series` and `states` must point to `n` values; `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fse_model_fit(
    series: *const f64,
    n: usize,
    states: *const i32,
    m: usize,
    p: usize,
    out_model: *mut *mut FseModel,
) -> FseStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        let (s, d) = series_and_design(series, n, states, m)?;
        let fit = fse::fit(&s, &d, p)?;
        *slot = Box::into_raw(Box::new(FseModel { fit }));
        Ok(())
    })
}

/// AICc order selection over `0..=p_max`.
///
/// # Safety
/// As for [`fse_model_fit`]; `out_p` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fse_select_order(
    series: *const f64,
    n: usize,
    states: *const i32,
    m: usize,
    p_max: usize,
    out_p: *mut usize,
) -> FseStatus {
    guard(|| {
        let slot = out(out_p, "out_p")?;
        let (s, d) = series_and_design(series, n, states, m)?;
        *slot = fse::select_order(&s, &d, p_max)?.p;
        Ok(())
    })
}

/// Order and state count of a fitted model.
///
/// # Safety
/// `model` must be a live handle; `out_p` and `out_m` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fse_model_shape(
    model: *const FseModel,
    out_p: *mut usize,
    out_m: *mut usize,
) -> FseStatus {
    guard(|| {
        let m = model.as_ref().ok_or(Fail::Null("model"))?;
        *out(out_p, "out_p")? = m.fit.p;
        *out(out_m, "out_m")? = m.fit.m;
        Ok(())
    })
}

/// Copy `alpha0, alpha_1..alpha_p, beta_1..beta_m` into `buffer`. The
/// required length `1 + p + m` is written to `out_len` even when `capacity`
/// is too small, in which case nothing is copied and the call fails.
///
/// # Safety
/// `model` must be a live handle; `buffer` must have room for `capacity`
/// doubles; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fse_model_coefficients(
    model: *const FseModel,
    buffer: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> FseStatus {
    guard(|| {
        let m = model.as_ref().ok_or(Fail::Null("model"))?;
        let c = &m.fit.regression.coefficients;
        *out(out_len, "out_len")? = c.len();
        if capacity < c.len() {
            return Err(Fail::Input(format!(
                "buffer holds {capacity} values, {} needed",
                c.len()
            )));
        }
        if buffer.is_null() {
            return Err(Fail::Null("buffer"));
        }
        ptr::copy_nonoverlapping(c.as_ptr(), buffer, c.len());
        Ok(())
    })
}

/// Recursive forecasts for `h` weeks after `last_observations`.
///
/// # Safety
/// `last_observations` must point to `n_last` doubles, `future_states` to
/// `h` labels (or NULL when the model has no states) and `out_forecasts`
/// to room for `h` doubles.
#[no_mangle]
pub unsafe extern "C" fn fse_model_forecast(
    model: *const FseModel,
    last_observations: *const f64,
    n_last: usize,
    future_states: *const i32,
    h: usize,
    out_forecasts: *mut f64,
) -> FseStatus {
    guard(|| {
        let m = model.as_ref().ok_or(Fail::Null("model"))?;
        let last = slice(last_observations, n_last, "last_observations")?;
        let d = if future_states.is_null() {
            StateDesign::new(m.fit.m, vec![None; h])?
        } else {
            design(slice(future_states, h, "future_states")?, m.fit.m)?
        };
        let f = fse::forecast(&m.fit, last, &d, ForecastMode::Recursive)?;
        if out_forecasts.is_null() {
            return Err(Fail::Null("out_forecasts"));
        }
        ptr::copy_nonoverlapping(f.as_ptr(), out_forecasts, f.len());
        Ok(())
    })
}

/// The full fit as JSON; free with [`fse_string_free`].
///
/// # Safety
/// `model` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fse_model_to_json(
    model: *const FseModel,
    out_json: *mut *mut c_char,
) -> FseStatus {
    guard(|| {
        let m = model.as_ref().ok_or(Fail::Null("model"))?;
        let slot = out(out_json, "out_json")?;
        *slot = to_c_string(serde_json::to_string(&m.fit).map_err(Error::from)?);
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fse_model_free(model: *mut FseModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Load CSV files; `forecasts` may be NULL.
///
/// # Safety
/// Paths must be NUL-terminated strings; `out_bundle` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fse_bundle_load(
    demand: *const c_char,
    calendar: *const c_char,
    factors: *const c_char,
    forecasts: *const c_char,
    out_bundle: *mut *mut FseBundle,
) -> FseStatus {
    guard(|| {
        let slot = out(out_bundle, "out_bundle")?;
        let paths = BundlePaths {
            demand: path(demand, "demand")?,
            calendar: path(calendar, "calendar")?,
            factors: path(factors, "factors")?,
            forecasts: if forecasts.is_null() {
                None
            } else {
                Some(path(forecasts, "forecasts")?)
            },
        };
        let bundle = load_bundle(&paths)?;
        *slot = Box::into_raw(Box::new(FseBundle { bundle }));
        Ok(())
    })
}

/// Synthetic bundle shaped like case `shape` (`'A'` or `'B'`).
///
/// # Safety
/// `out_bundle` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fse_bundle_simulate(
    shape: c_char,
    seed: u64,
    out_bundle: *mut *mut FseBundle,
) -> FseStatus {
    guard(|| {
        let slot = out(out_bundle, "out_bundle")?;
        let shape = match shape as u8 {
            b'A' | b'a' => Shape::A,
            b'B' | b'b' => Shape::B,
            other => return Err(Fail::Input(format!("unknown shape {:?}", other as char))),
        };
        let bundle = generate(&make_company_shaped_spec(shape, seed))?.to_dataset();
        *slot = Box::into_raw(Box::new(FseBundle { bundle }));
        Ok(())
    })
}

/// Number of weeks in the bundle.
///
/// # Safety
/// `bundle` must be a live handle; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fse_bundle_len(
    bundle: *const FseBundle,
    out_len: *mut usize,
) -> FseStatus {
    guard(|| {
        let b = bundle.as_ref().ok_or(Fail::Null("bundle"))?;
        *out(out_len, "out_len")? = b.bundle.demand.len();
        Ok(())
    })
}

/// Write the bundle's CSV files into `dir`.
///
/// # Safety
/// `bundle` must be a live handle; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fse_bundle_save(
    bundle: *const FseBundle,
    dir: *const c_char,
) -> FseStatus {
    guard(|| {
        let b = bundle.as_ref().ok_or(Fail::Null("bundle"))?;
        save_bundle(&b.bundle, &path(dir, "dir")?)?;
        Ok(())
    })
}

/// # Safety
/// `bundle` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fse_bundle_free(bundle: *mut FseBundle) {
    if !bundle.is_null() {
        drop(Box::from_raw(bundle));
    }
}

/// Evaluate a bundle. `config` is NULL or the text of a `key = value` file.
///
/// # Safety
/// `bundle` must be a live handle, `config` NULL or NUL-terminated and
/// `out_report` writable.
#[no_mangle]
pub unsafe extern "C" fn fse_case_run(
    bundle: *const FseBundle,
    config: *const c_char,
    out_report: *mut *mut FseReport,
) -> FseStatus {
    guard(|| {
        let b = bundle.as_ref().ok_or(Fail::Null("bundle"))?;
        let slot = out(out_report, "out_report")?;
        let case = if config.is_null() {
            CaseConfig::default()
        } else {
            let text = CStr::from_ptr(config)
                .to_str()
                .map_err(|_| Fail::Input("config is not valid UTF-8".into()))?;
            CaseConfig::from_config(&parse_config(text)?)
        };
        let report = run_case(&b.bundle, &case)?;
        *slot = Box::into_raw(Box::new(FseReport { report }));
        Ok(())
    })
}

/// Human-readable report tables; free with [`fse_string_free`].
///
/// # Safety
/// `report` must be a live handle; `out_text` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fse_report_text(
    report: *const FseReport,
    out_text: *mut *mut c_char,
) -> FseStatus {
    guard(|| {
        let r = report.as_ref().ok_or(Fail::Null("report"))?;
        *out(out_text, "out_text")? = to_c_string(r.report.render_text());
        Ok(())
    })
}

/// The report as JSON; free with [`fse_string_free`].
///
/// # Safety
/// As for [`fse_report_text`].
#[no_mangle]
pub unsafe extern "C" fn fse_report_json(
    report: *const FseReport,
    out_json: *mut *mut c_char,
) -> FseStatus {
    guard(|| {
        let r = report.as_ref().ok_or(Fail::Null("report"))?;
        *out(out_json, "out_json")? =
            to_c_string(serde_json::to_string(&r.report).map_err(Error::from)?);
        Ok(())
    })
}

/// # Safety
/// `report` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fse_report_free(report: *mut FseReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

//! C ABI for the bondtca engine.
//!
//! Every function returns a status code (`BONDTCA_OK` on success) and writes
//! results through out-pointers. Objects are opaque handles released with
//! their `_free` function. After a failure, `bondtca_last_error` returns a
//! message describing it; the pointer stays valid until the next call on the
//! same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use bondtca::impact::{estimate_bond, BondImpact, ImpactConfig, ImpactModel, SignSeries};
use bondtca::pipeline::{self, RunConfig};
use bondtca::regress::{fit, Dataset, FitResult, Model, Penalty};
use bondtca::stats::{anova_f, kruskal_h, ks_two_sample, welch_t, TestResult};
use bondtca::Error;

pub const BONDTCA_OK: i32 = 0;
pub const BONDTCA_NULL_POINTER: i32 = 1;
pub const BONDTCA_INVALID_ARGUMENT: i32 = 2;
pub const BONDTCA_DATA: i32 = 3;
pub const BONDTCA_NUMERICAL: i32 = 4;
pub const BONDTCA_PANIC: i32 = 5;

/// Run configuration.
pub struct BondtcaConfig(RunConfig);

/// Signed event series of one bond.
pub struct BondtcaSeries(SignSeries);

/// Estimated impact kernel(s) and signature plot.
pub struct BondtcaKernel(BondImpact);

/// Fitted regression.
pub struct BondtcaFit(FitResult);

/// Statistic and p-value of a hypothesis test.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BondtcaTest {
    pub statistic: f64,
    pub p_value: f64,
    pub degenerate: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn code_of(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidInput(_) => BONDTCA_INVALID_ARGUMENT,
        Error::RankDeficient { .. } | Error::IllConditioned { .. } | Error::Numerical(_) => BONDTCA_NUMERICAL,
        _ => BONDTCA_DATA,
    }
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, records any failure and converts it to a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BONDTCA_OK,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            BONDTCA_NULL_POINTER
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            BONDTCA_INVALID_ARGUMENT
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            code_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            BONDTCA_PANIC
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn get_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Arg(format!("{what} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    let slot = get_mut(out, "out")?;
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message for the last failed call on this thread (empty after success).
#[no_mangle]
pub extern "C" fn bondtca_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bondtca_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default run configuration.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bondtca_config_new(out: *mut *mut BondtcaConfig) -> i32 {
    guard(|| put(out, BondtcaConfig(RunConfig::default())))
}

/// Configuration parsed from TOML text.
///
/// # Safety
/// `toml` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bondtca_config_from_toml(toml: *const c_char, out: *mut *mut BondtcaConfig) -> i32 {
    guard(|| {
        let cfg = RunConfig::from_toml(text(toml, "toml")?)?;
        put(out, BondtcaConfig(cfg))
    })
}

/// # Safety
/// `cfg` must be a live handle and `dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn bondtca_config_set_out_dir(cfg: *mut BondtcaConfig, dir: *const c_char) -> i32 {
    guard(|| {
        get_mut(cfg, "cfg")?.0.paths.out_dir = PathBuf::from(text(dir, "dir")?);
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bondtca_config_set_seed(cfg: *mut BondtcaConfig, seed: u64) -> i32 {
    guard(|| {
        get_mut(cfg, "cfg")?.0.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn bondtca_config_free(cfg: *mut BondtcaConfig) {
    free(cfg)
}

/// Runs one stage: generate, ingest, classify, spread, features, fit, impact,
/// report, or pipeline (all stages after generate).
///
/// # Safety
/// `cfg` must be a live handle and `stage` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn bondtca_run_stage(cfg: *const BondtcaConfig, stage: *const c_char) -> i32 {
    guard(|| {
        let cfg = &get(cfg, "cfg")?.0;
        let stage = text(stage, "stage")?;
        cfg.validate()?;
        std::fs::create_dir_all(&cfg.paths.out_dir).map_err(|e| Error::io(&cfg.paths.out_dir, e))?;
        match stage {
            "generate" => pipeline::run_generate(cfg)?,
            "ingest" => drop(pipeline::run_ingest(cfg)?),
            "classify" => drop(pipeline::run_classify(cfg)?),
            "spread" => pipeline::run_spread(cfg)?,
            "features" => drop(pipeline::run_features(cfg)?),
            "fit" => drop(pipeline::run_fit(cfg)?),
            "impact" => drop(pipeline::run_impact(cfg)?),
            "report" => drop(pipeline::run_report(cfg)?),
            "pipeline" => pipeline::run_pipeline(cfg, false)?,
            other => return Err(Fail::Arg(format!("unknown stage {other:?}"))),
        }
        Ok(())
    })
}

/// Series from parallel arrays of signs (+1/-1), volumes and mid-prices.
///
/// # Safety
/// Each array must hold `len` elements; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bondtca_series_new(
    eps: *const i8,
    volume: *const f64,
    mid: *const f64,
    len: usize,
    out: *mut *mut BondtcaSeries,
) -> i32 {
    guard(|| {
        let s = SignSeries::new(
            "FFI",
            slice(eps, len, "eps")?.to_vec(),
            slice(volume, len, "volume")?.to_vec(),
            slice(mid, len, "mid")?.to_vec(),
        )?;
        put(out, BondtcaSeries(s))
    })
}

/// # Safety
/// `s` must be a handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn bondtca_series_free(s: *mut BondtcaSeries) {
    free(s)
}

/// Estimates the impact kernel. `model` is 1 (single event type) or 2
/// (buy/sell event types).
///
/// # Safety
/// `series` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bondtca_impact_estimate(
    series: *const BondtcaSeries,
    model: i32,
    alpha: f64,
    n: usize,
    l: usize,
    out: *mut *mut BondtcaKernel,
) -> i32 {
    guard(|| {
        let series = &get(series, "series")?.0;
        let model = match model {
            1 => ImpactModel::Tim1,
            2 => ImpactModel::Tim2,
            m => return Err(Fail::Arg(format!("model must be 1 or 2, got {m}"))),
        };
        let config = ImpactConfig {
            model,
            alpha,
            n,
            l,
            l_max: n.max(1),
            ..ImpactConfig::default()
        };
        put(out, BondtcaKernel(estimate_bond(series, &config)?))
    })
}

fn kernel_label(k: &BondImpact, event_type: i32) -> Result<&'static str, Fail> {
    match (k.kernel.model, event_type) {
        (ImpactModel::Tim1, 0) => Ok("all"),
        (ImpactModel::Tim2, 1) => Ok("+1"),
        (ImpactModel::Tim2, -1) => Ok("-1"),
        (m, t) => Err(Fail::Arg(format!(
            "event type {t} is not valid for {m} (use 0 for tim1, +1/-1 for tim2)"
        ))),
    }
}

/// Copies `G(0..=N)` for one event type into `buf` and stores the number of
/// values in `written`. Event type 0 for single-type kernels, +1/-1 otherwise.
///
/// # Safety
/// `k` must be a live handle; `buf` must hold `cap` values; `written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bondtca_kernel_values(
    k: *const BondtcaKernel,
    event_type: i32,
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> i32 {
    guard(|| {
        let k = &get(k, "kernel")?.0;
        let g = &k.kernel.kernels[kernel_label(k, event_type)?].g;
        let written = get_mut(written, "written")?;
        if cap < g.len() {
            *written = g.len();
            return Err(Fail::Arg(format!("buffer holds {cap} values, kernel has {}", g.len())));
        }
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        std::ptr::copy_nonoverlapping(g.as_ptr(), buf, g.len());
        *written = g.len();
        Ok(())
    })
}

/// # Safety
/// `k` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bondtca_kernel_condition_number(k: *const BondtcaKernel, out: *mut f64) -> i32 {
    guard(|| {
        *get_mut(out, "out")? = get(k, "kernel")?.0.kernel.condition_number;
        Ok(())
    })
}

/// Sum over lags of the squared gap between the model and empirical signature plots.
///
/// # Safety
/// `k` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bondtca_kernel_signature_ssd(k: *const BondtcaKernel, out: *mut f64) -> i32 {
    guard(|| {
        *get_mut(out, "out")? = get(k, "kernel")?.0.signature.sum_squared_deviation();
        Ok(())
    })
}

/// # Safety
/// `k` must be a handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn bondtca_kernel_free(k: *mut BondtcaKernel) {
    free(k)
}

/// Fits `model` ("ols", "ridge", "lasso", "lslasso" or "en") to a row-major
/// `n x p` design (no intercept column) and response `y`.
///
/// # Safety
/// `x` must hold `n * p` values, `y` `n` values; `model` NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bondtca_fit(
    model: *const c_char,
    x: *const f64,
    y: *const f64,
    n: usize,
    p: usize,
    lambda: f64,
    alpha: f64,
    out: *mut *mut BondtcaFit,
) -> i32 {
    guard(|| {
        let model: Model = text(model, "model")?.parse()?;
        let cells = n.checked_mul(p).ok_or_else(|| Fail::Arg("n * p overflows".into()))?;
        let x = slice(x, cells, "x")?;
        let rows: Vec<Vec<f64>> = (0..n).map(|i| x[i * p..(i + 1) * p].to_vec()).collect();
        let names = (1..=p).map(|j| format!("x{j}")).collect();
        let data = Dataset::from_rows(names, &rows, slice(y, n, "y")?)?;
        put(out, BondtcaFit(fit(model, &data, lambda, alpha, &Penalty::default())?))
    })
}

/// Writes the intercept followed by the `p` slope coefficients into `buf`.
///
/// # Safety
/// `f` must be a live handle and `buf` hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn bondtca_fit_coefficients(f: *const BondtcaFit, buf: *mut f64, cap: usize) -> i32 {
    guard(|| {
        let f = &get(f, "fit")?.0;
        let need = f.coefficients.len() + 1;
        if cap < need {
            return Err(Fail::Arg(format!("buffer holds {cap} values, fit has {need}")));
        }
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        *buf = f.intercept;
        std::ptr::copy_nonoverlapping(f.coefficients.as_ptr(), buf.add(1), need - 1);
        Ok(())
    })
}

/// # Safety
/// `f` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bondtca_fit_r2(f: *const BondtcaFit, out: *mut f64) -> i32 {
    guard(|| {
        *get_mut(out, "out")? = get(f, "fit")?.0.r2;
        Ok(())
    })
}

/// # Safety
/// `f` must be a handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn bondtca_fit_free(f: *mut BondtcaFit) {
    free(f)
}

unsafe fn two_sample(
    x: *const f64,
    nx: usize,
    y: *const f64,
    ny: usize,
    out: *mut BondtcaTest,
    test: fn(&[f64], &[f64]) -> bondtca::Result<TestResult>,
) -> i32 {
    guard(|| {
        let r = test(slice(x, nx, "x")?, slice(y, ny, "y")?)?;
        *get_mut(out, "out")? = BondtcaTest {
            statistic: r.statistic,
            p_value: r.p_value,
            degenerate: r.degenerate,
        };
        Ok(())
    })
}

/// Welch two-sample t-test.
///
/// # Safety
/// `x`/`y` must hold `nx`/`ny` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bondtca_welch_t(
    x: *const f64,
    nx: usize,
    y: *const f64,
    ny: usize,
    out: *mut BondtcaTest,
) -> i32 {
    two_sample(x, nx, y, ny, out, welch_t)
}

/// Two-sample Kolmogorov-Smirnov test.
///
/// # Safety
/// As [`bondtca_welch_t`].
#[no_mangle]
pub unsafe extern "C" fn bondtca_ks(x: *const f64, nx: usize, y: *const f64, ny: usize, out: *mut BondtcaTest) -> i32 {
    two_sample(x, nx, y, ny, out, ks_two_sample)
}

/// One-way ANOVA on two groups.
///
/// # Safety
/// As [`bondtca_welch_t`].
#[no_mangle]
pub unsafe extern "C" fn bondtca_anova2(
    x: *const f64,
    nx: usize,
    y: *const f64,
    ny: usize,
    out: *mut BondtcaTest,
) -> i32 {
    two_sample(x, nx, y, ny, out, |a, b| anova_f(&[a.to_vec(), b.to_vec()]))
}

/// Kruskal-Wallis H on two groups.
///
/// # Safety
/// As [`bondtca_welch_t`].
#[no_mangle]
pub unsafe extern "C" fn bondtca_kruskal2(
    x: *const f64,
    nx: usize,
    y: *const f64,
    ny: usize,
    out: *mut BondtcaTest,
) -> i32 {
    two_sample(x, nx, y, ny, out, |a, b| kruskal_h(&[a.to_vec(), b.to_vec()]))
}

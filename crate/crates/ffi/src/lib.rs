//! C ABI for tsperf.
//!
//! Every fallible call returns a [`TsperfStatus`]; on anything other than
//! `TSPERF_STATUS_OK` a message is available from [`tsperf_last_error`] on the same
//! thread. Objects handed out through `out` pointers are owned by the caller
//! and released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tsperf::splitters::build_plan;
use tsperf::{
    Error, FnnConfig, LearnerSpec, Method, MethodParams, Penalty, ResamplingPlan, TimeSeries,
};

/// Opaque series handle.
pub struct TsperfSeries(TimeSeries);

/// Opaque resampling plan handle.
pub struct TsperfPlan(ResamplingPlan);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsperfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SeriesTooShort = 3,
    EmptyTrainingSet = 4,
    Io = 5,
    Parse = 6,
    UnknownMethod = 7,
    Numerical = 8,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsperfLearnerKind {
    Lasso = 0,
    Knn = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsperfLearner {
    pub kind: TsperfLearnerKind,
    /// Lasso penalty as a fraction of the smallest all-zero penalty.
    pub lambda_fraction: f64,
    pub neighbours: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsperfPlanConfig {
    pub folds: usize,
    pub nreps: usize,
    /// CV-Mod / CV-hvBl removal radius, normally the embedding dimension.
    pub removal: usize,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsperfPart {
    Train = 0,
    Test = 1,
    Gap = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TsperfSignTest {
    pub p_left: f64,
    pub p_rope: f64,
    pub p_right: f64,
    pub count_left: usize,
    pub count_rope: usize,
    pub count_right: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> TsperfStatus {
    match err {
        Error::InvalidArgument(_) | Error::DegenerateSplit(_) | Error::DimensionMismatch { .. } | Error::Config(_) => {
            TsperfStatus::InvalidArgument
        }
        Error::SeriesTooShort { .. } => TsperfStatus::SeriesTooShort,
        Error::EmptyTrainingSet { .. } => TsperfStatus::EmptyTrainingSet,
        Error::Io { .. } => TsperfStatus::Io,
        Error::Parse { .. }
        | Error::EmptyColumn { .. }
        | Error::MissingColumn { .. }
        | Error::Csv(_)
        | Error::Json(_)
        | Error::NonFinite { .. } => TsperfStatus::Parse,
        Error::UnknownMethod(_) => TsperfStatus::UnknownMethod,
        Error::Unstable(_) | Error::SingularDesign => TsperfStatus::Numerical,
    }
}

struct Fail(TsperfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TsperfStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TsperfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TsperfStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            TsperfStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn string<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Fail(TsperfStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn series<'a>(s: *const TsperfSeries, what: &str) -> Result<&'a TimeSeries, Fail> {
    s.as_ref().map(|s| &s.0).ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn learner_spec(l: &TsperfLearner) -> LearnerSpec {
    match l.kind {
        TsperfLearnerKind::Lasso => LearnerSpec::lasso(Penalty::FractionOfMax(l.lambda_fraction)),
        TsperfLearnerKind::Knn => LearnerSpec::knn(l.neighbours),
    }
}

fn method_params(c: &TsperfPlanConfig) -> MethodParams {
    MethodParams {
        folds: c.folds,
        nreps: c.nreps,
        ..MethodParams::default()
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next tsperf call on the same thread.
#[no_mangle]
pub extern "C" fn tsperf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn tsperf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn tsperf_learner_default() -> TsperfLearner {
    TsperfLearner {
        kind: TsperfLearnerKind::Lasso,
        lambda_fraction: 0.01,
        neighbours: 5,
    }
}

#[no_mangle]
pub extern "C" fn tsperf_plan_config_default() -> TsperfPlanConfig {
    let d = MethodParams::default();
    TsperfPlanConfig {
        folds: d.folds,
        nreps: d.nreps,
        removal: 5,
        seed: 0,
    }
}

/// Copies `len` values into a new series.
///
/// # Safety
/// `values` must point to `len` doubles; `name` is null or a nul-terminated
/// string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tsperf_series_new(
    name: *const c_char,
    values: *const f64,
    len: usize,
    out: *mut *mut TsperfSeries,
) -> TsperfStatus {
    guard(|| {
        let name = if name.is_null() { "series" } else { string(name, "name")? };
        let s = TimeSeries::new(name, slice(values, len, "values")?.to_vec())?;
        write(out, Box::into_raw(Box::new(TsperfSeries(s))), "out")
    })
}

/// Loads column `column` (0-based) of a CSV file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsperf_series_load_csv(
    path: *const c_char,
    column: usize,
    out: *mut *mut TsperfSeries,
) -> TsperfStatus {
    guard(|| {
        let s = tsperf::load_csv(string(path, "path")?, &tsperf::series::Column::Index(column))?;
        write(out, Box::into_raw(Box::new(TsperfSeries(s))), "out")
    })
}

/// Number of observations, or 0 for a null handle.
///
/// # Safety
/// `s` is null or a live series handle.
#[no_mangle]
pub unsafe extern "C" fn tsperf_series_len(s: *const TsperfSeries) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

/// Pointer to the observations, valid while the series lives.
///
/// # Safety
/// `s` is null or a live series handle.
#[no_mangle]
pub unsafe extern "C" fn tsperf_series_values(s: *const TsperfSeries) -> *const f64 {
    s.as_ref().map_or(ptr::null(), |s| s.0.values().as_ptr())
}

/// # Safety
/// `s` is null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tsperf_series_free(s: *mut TsperfSeries) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Builds the plan of `method` (e.g. "CV-hvBl") over `n` embedded rows.
///
/// # Safety
/// `method` must be a nul-terminated string, `config` readable and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn tsperf_plan_new(
    method: *const c_char,
    n: usize,
    config: *const TsperfPlanConfig,
    out: *mut *mut TsperfPlan,
) -> TsperfStatus {
    guard(|| {
        let method: Method = string(method, "method")?.parse()?;
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        let plan = build_plan(method, n, &method_params(c), c.removal, c.seed)?;
        write(out, Box::into_raw(Box::new(TsperfPlan(plan))), "out")
    })
}

/// # Safety
/// `plan` is null or a live plan handle.
#[no_mangle]
pub unsafe extern "C" fn tsperf_plan_iterations(plan: *const TsperfPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.0.iterations.len())
}

/// Row indices of one part of one iteration. The array stays valid while
/// the plan lives.
///
/// # Safety
/// `plan` must be a live plan handle; `indices` and `len` writable.
#[no_mangle]
pub unsafe extern "C" fn tsperf_plan_part(
    plan: *const TsperfPlan,
    iteration: usize,
    part: TsperfPart,
    indices: *mut *const usize,
    len: *mut usize,
) -> TsperfStatus {
    guard(|| {
        let plan = &plan.as_ref().ok_or_else(|| null("plan"))?.0;
        let it = plan.iterations.get(iteration).ok_or_else(|| {
            Fail(
                TsperfStatus::InvalidArgument,
                format!("iteration {iteration} out of range ({})", plan.iterations.len()),
            )
        })?;
        let rows = match part {
            TsperfPart::Train => &it.train,
            TsperfPart::Test => &it.test,
            TsperfPart::Gap => &it.gap,
        };
        write(indices, rows.as_ptr(), "indices")?;
        write(len, rows.len(), "len")
    })
}

/// JSON form of the plan; release it with [`tsperf_string_free`].
///
/// # Safety
/// `plan` must be a live plan handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsperf_plan_to_json(plan: *const TsperfPlan, out: *mut *mut c_char) -> TsperfStatus {
    guard(|| {
        let json = plan.as_ref().ok_or_else(|| null("plan"))?.0.to_json()?;
        let json = CString::new(json).expect("json has no nul");
        write(out, json.into_raw(), "out")
    })
}

/// # Safety
/// `plan` is null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tsperf_plan_free(plan: *mut TsperfPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// # Safety
/// `s` is null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tsperf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loss estimate of `method` on `estimation` with embedding dimension `p`.
///
/// # Safety
/// Pointers must be valid as described for the other calls.
#[no_mangle]
pub unsafe extern "C" fn tsperf_estimate_loss(
    estimation: *const TsperfSeries,
    method: *const c_char,
    config: *const TsperfPlanConfig,
    learner: *const TsperfLearner,
    p: usize,
    out: *mut f64,
) -> TsperfStatus {
    guard(|| {
        let s = series(estimation, "estimation")?;
        let method: Method = string(method, "method")?.parse()?;
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        let l = learner.as_ref().ok_or_else(|| null("learner"))?;
        let est = tsperf::estimate_loss(s, method, &method_params(c), &learner_spec(l), p, c.seed)?;
        write(out, est.estimate, "out")
    })
}

/// Loss of a model trained on `estimation` and scored on `validation`.
///
/// # Safety
/// Pointers must be valid as described for the other calls.
#[no_mangle]
pub unsafe extern "C" fn tsperf_true_loss(
    estimation: *const TsperfSeries,
    validation: *const TsperfSeries,
    learner: *const TsperfLearner,
    p: usize,
    out: *mut f64,
) -> TsperfStatus {
    guard(|| {
        let l = learner.as_ref().ok_or_else(|| null("learner"))?;
        let loss = tsperf::true_loss(
            series(estimation, "estimation")?,
            series(validation, "validation")?,
            &learner_spec(l),
            p,
        )?;
        write(out, loss, "out")
    })
}

/// # Safety
/// `predictions` and `actuals` must each point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tsperf_rmse(
    predictions: *const f64,
    actuals: *const f64,
    len: usize,
    out: *mut f64,
) -> TsperfStatus {
    guard(|| {
        let v = tsperf::rmse(slice(predictions, len, "predictions")?, slice(actuals, len, "actuals")?)?;
        write(out, v, "out")
    })
}

/// # Safety
/// `differences` must point to `len` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn tsperf_bayes_sign_test(
    differences: *const f64,
    len: usize,
    rope_low: f64,
    rope_high: f64,
    samples: usize,
    prior_strength: f64,
    seed: u64,
    out: *mut TsperfSignTest,
) -> TsperfStatus {
    guard(|| {
        let d = slice(differences, len, "differences")?;
        let t = tsperf::bayes_sign_test(d, rope_low, rope_high, samples, prior_strength, seed)?;
        let r = TsperfSignTest {
            p_left: t.p_left,
            p_rope: t.p_rope,
            p_right: t.p_right,
            count_left: t.counts[0],
            count_rope: t.counts[1],
            count_right: t.counts[2],
        };
        write(out, r, "out")
    })
}

/// False Nearest Neighbours dimension. A non-positive `loneliness` drops the
/// loneliness criterion.
///
/// # Safety
/// `s` must be a live series handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tsperf_embedding_dimension(
    s: *const TsperfSeries,
    max_dimension: usize,
    tolerance: f64,
    ratio_threshold: f64,
    loneliness: f64,
    out: *mut usize,
) -> TsperfStatus {
    guard(|| {
        let config = FnnConfig {
            max_dimension,
            tolerance,
            ratio_threshold,
            loneliness_threshold: (loneliness > 0.0).then_some(loneliness),
        };
        let o = tsperf::estimate_embedding_dimension(series(s, "series")?, &config)?;
        write(out, o.dimension, "out")
    })
}

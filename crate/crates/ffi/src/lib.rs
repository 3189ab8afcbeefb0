//! C ABI for the ragscale scaling-law toolkit.
//!
//! Conventions:
//! * Every fallible function returns a `RagscaleStatus`; results come back
//!   through out-pointers that are written only on `Ok`.
//! * Datasets and fits are opaque handles created and freed here; never
//!   free them with anything but the matching `*_free` function.
//! * Strings returned through out-pointers are NUL-terminated, allocated by
//!   this library, and must be released with `ragscale_string_free`.
//! * `ragscale_last_error_message` returns a thread-local description of
//!   the most recent failure on the calling thread; the pointer stays
//!   valid until the next failing call on that thread.
//!
//! The header `include/ragscale.h` is generated from this file at build
//! time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ragscale::allocation;
use ragscale::datastore;
use ragscale::error::Error;
use ragscale::fitter::{fit_two_stage, FitConfig, LawFamily};
use ragscale::laws::{eval_2d, eval_3d, GainFamily, Params2D, Params3D};
use ragscale::records::{load_dataset, Dataset, FileFormat, FilterPredicate};
use ragscale::report::{fit_report_to_json, BenchmarkFit, FitReport, SCHEMA_VERSION};

/// Status codes for every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RagscaleStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    IoError = 3,
    ParseError = 4,
    DomainError = 5,
    InsufficientData = 6,
    NoConvergence = 7,
    InvalidArgument = 8,
    NumericalError = 9,
    Panic = 10,
}

/// Retrieval gain family selector for the C surface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RagscaleFamily {
    TwoD = 0,
    LogGain = 1,
    PowerGain = 2,
}

/// Flat law parameters. For `TwoD`, `c` and `rate` are ignored on input
/// and zeroed on output.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RagscaleLawParams {
    pub a: f64,
    pub alpha: f64,
    pub b: f64,
    pub beta: f64,
    pub l0: f64,
    pub c: f64,
    pub rate: f64,
    pub family: RagscaleFamily,
}

/// Opaque dataset handle.
pub struct RagscaleDataset {
    inner: Dataset,
}

/// Opaque fit handle: the two-stage result for one benchmark.
pub struct RagscaleFit {
    report: FitReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> RagscaleStatus {
    match err {
        Error::Io { .. } => RagscaleStatus::IoError,
        Error::Parse { .. } | Error::Schema { .. } => RagscaleStatus::ParseError,
        Error::Domain { .. }
        | Error::NonPositivePrediction(_)
        | Error::ZeroRetrieval
        | Error::EmptyInput
        | Error::NonPositiveInput(_)
        | Error::LengthMismatch { .. }
        | Error::ZeroVariance
        | Error::MissingBaseline(_)
        | Error::EmptyCatalog
        | Error::BudgetExceedsCorpus { .. }
        | Error::SeedMismatch { .. }
        | Error::DigestMismatch
        | Error::SingleGroup(_)
        | Error::MissingGroup(_)
        | Error::InsufficientPoints(_)
        | Error::ZeroSlope
        | Error::BudgetTooSmall { .. } => RagscaleStatus::DomainError,
        Error::InsufficientData(_) => RagscaleStatus::InsufficientData,
        Error::NoConvergence(_) => RagscaleStatus::NoConvergence,
        Error::InvalidArgument(_) => RagscaleStatus::InvalidArgument,
    }
}

fn fail(err: &Error) -> RagscaleStatus {
    set_error(&err.to_string());
    status_of(err)
}

fn guard<F: FnOnce() -> RagscaleStatus>(body: F) -> RagscaleStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("panic inside ragscale");
            RagscaleStatus::Panic
        }
    }
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, RagscaleStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(RagscaleStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        RagscaleStatus::InvalidUtf8
    })
}

fn params_from_c(p: &RagscaleLawParams) -> (Params2D, Option<Params3D>) {
    let base = Params2D {
        a: p.a,
        alpha: p.alpha,
        b: p.b,
        beta: p.beta,
        l0: p.l0,
    };
    let three = match p.family {
        RagscaleFamily::TwoD => None,
        RagscaleFamily::LogGain => Some(Params3D {
            base,
            c: p.c,
            rate: p.rate,
            family: GainFamily::LogGain,
        }),
        RagscaleFamily::PowerGain => Some(Params3D {
            base,
            c: p.c,
            rate: p.rate,
            family: GainFamily::PowerGain,
        }),
    };
    (base, three)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ragscale_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread. Never null; empty
/// before the first failure. Do not free.
#[no_mangle]
pub extern "C" fn ragscale_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Frees a string returned through an out-pointer by this library.
///
/// # Safety
/// `s` must have been returned by a ragscale function or be null.
#[no_mangle]
pub unsafe extern "C" fn ragscale_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a dataset from a CSV or JSON file (format inferred from the
/// extension) and returns an owned handle through `out`.
///
/// # Safety
/// `path` must point to a NUL-terminated string and `out` to writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn ragscale_dataset_load(
    path: *const c_char,
    out: *mut *mut RagscaleDataset,
) -> RagscaleStatus {
    guard(|| {
        if out.is_null() {
            set_error("null out pointer");
            return RagscaleStatus::NullArgument;
        }
        let path = match cstr_arg(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let path = Path::new(path);
        match load_dataset(path, FileFormat::infer(path)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RagscaleDataset { inner }));
                RagscaleStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Number of records in the dataset.
///
/// # Safety
/// `dataset` must be a live handle from `ragscale_dataset_load`; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ragscale_dataset_len(
    dataset: *const RagscaleDataset,
    out: *mut usize,
) -> RagscaleStatus {
    guard(|| {
        if dataset.is_null() || out.is_null() {
            set_error("null argument");
            return RagscaleStatus::NullArgument;
        }
        *out = (*dataset).inner.len();
        RagscaleStatus::Ok
    })
}

/// Releases a dataset handle.
///
/// # Safety
/// `dataset` must be a handle from `ragscale_dataset_load` or null; it
/// must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ragscale_dataset_free(dataset: *mut RagscaleDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Two-axis law evaluation at (n, d).
///
/// # Safety
/// `params` and `out` must be valid for reads/writes respectively.
#[no_mangle]
pub unsafe extern "C" fn ragscale_eval_2d(
    params: *const RagscaleLawParams,
    n: f64,
    d: f64,
    out: *mut f64,
) -> RagscaleStatus {
    guard(|| {
        if params.is_null() || out.is_null() {
            set_error("null argument");
            return RagscaleStatus::NullArgument;
        }
        let (base, _) = params_from_c(&*params);
        *out = eval_2d(&base, n, d);
        RagscaleStatus::Ok
    })
}

/// Three-axis law evaluation at (n, d, r). Fails with `DomainError` when a
/// log-gain prediction is not positive.
///
/// # Safety
/// `params` and `out` must be valid for reads/writes respectively.
#[no_mangle]
pub unsafe extern "C" fn ragscale_eval_3d(
    params: *const RagscaleLawParams,
    n: f64,
    d: f64,
    r: f64,
    out: *mut f64,
) -> RagscaleStatus {
    guard(|| {
        if params.is_null() || out.is_null() {
            set_error("null argument");
            return RagscaleStatus::NullArgument;
        }
        let (base, three) = params_from_c(&*params);
        let value = match three {
            None => Ok(eval_2d(&base, n, d)),
            Some(p3) => eval_3d(&p3, n, d, r),
        };
        match value {
            Ok(v) => {
                *out = v;
                RagscaleStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Runs the seeded two-stage fit on one benchmark of the dataset.
/// `benchmark` may be null when the dataset holds exactly one. `n_starts`
/// of 0 selects the default (64).
///
/// # Safety
/// `dataset` must be a live handle; `benchmark` null or NUL-terminated;
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ragscale_fit(
    dataset: *const RagscaleDataset,
    family: RagscaleFamily,
    seed: u64,
    n_starts: usize,
    benchmark: *const c_char,
    out: *mut *mut RagscaleFit,
) -> RagscaleStatus {
    guard(|| {
        if dataset.is_null() || out.is_null() {
            set_error("null argument");
            return RagscaleStatus::NullArgument;
        }
        let data = &(*dataset).inner;
        let benchmark = if benchmark.is_null() {
            let names = data.benchmarks();
            if names.len() != 1 {
                set_error(&format!(
                    "dataset has {} benchmarks; pass one explicitly",
                    names.len()
                ));
                return RagscaleStatus::InvalidArgument;
            }
            names.into_iter().next().unwrap()
        } else {
            match cstr_arg(benchmark) {
                Ok(name) => name.to_string(),
                Err(status) => return status,
            }
        };
        let subset = data.filter(&FilterPredicate::benchmark(&benchmark));
        if subset.is_empty() {
            set_error(&format!("no records for benchmark `{benchmark}`"));
            return RagscaleStatus::InvalidArgument;
        }
        let mut cfg = FitConfig::new(match family {
            RagscaleFamily::TwoD => LawFamily::TwoD,
            RagscaleFamily::LogGain => LawFamily::LogGain,
            RagscaleFamily::PowerGain => LawFamily::PowerGain,
        });
        cfg.seed = seed;
        if n_starts > 0 {
            cfg.n_starts = n_starts;
        }
        match fit_two_stage(&subset, &cfg) {
            Ok((stage1, stage2)) => {
                let report = FitReport {
                    schema_version: SCHEMA_VERSION,
                    config: cfg,
                    fits: vec![BenchmarkFit {
                        benchmark,
                        stage1,
                        stage2,
                    }],
                };
                *out = Box::into_raw(Box::new(RagscaleFit { report }));
                RagscaleStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Copies the fitted law out of a fit handle.
///
/// # Safety
/// `fit` must be a live handle from `ragscale_fit`; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ragscale_fit_params(
    fit: *const RagscaleFit,
    out: *mut RagscaleLawParams,
) -> RagscaleStatus {
    guard(|| {
        if fit.is_null() || out.is_null() {
            set_error("null argument");
            return RagscaleStatus::NullArgument;
        }
        let entry = &(&(*fit).report.fits)[0];
        let base = entry.params_2d();
        *out = match &entry.stage2 {
            Some(s2) => {
                let g = s2.params.as_3d().expect("stage 2 is 3d");
                RagscaleLawParams {
                    a: g.base.a,
                    alpha: g.base.alpha,
                    b: g.base.b,
                    beta: g.base.beta,
                    l0: g.base.l0,
                    c: g.c,
                    rate: g.rate,
                    family: match g.family {
                        GainFamily::LogGain => RagscaleFamily::LogGain,
                        GainFamily::PowerGain => RagscaleFamily::PowerGain,
                    },
                }
            }
            None => RagscaleLawParams {
                a: base.a,
                alpha: base.alpha,
                b: base.b,
                beta: base.beta,
                l0: base.l0,
                c: 0.0,
                rate: 0.0,
                family: RagscaleFamily::TwoD,
            },
        };
        RagscaleStatus::Ok
    })
}

/// Serializes the full fit report (17-significant-digit JSON) into a newly
/// allocated string.
///
/// # Safety
/// `fit` must be a live handle; `out` writable. Free the string with
/// `ragscale_string_free`.
#[no_mangle]
pub unsafe extern "C" fn ragscale_fit_to_json(
    fit: *const RagscaleFit,
    out: *mut *mut c_char,
) -> RagscaleStatus {
    guard(|| {
        if fit.is_null() || out.is_null() {
            set_error("null argument");
            return RagscaleStatus::NullArgument;
        }
        let json = fit_report_to_json(&(*fit).report);
        match CString::new(json) {
            Ok(s) => {
                *out = s.into_raw();
                RagscaleStatus::Ok
            }
            Err(_) => {
                set_error("report contains an interior NUL");
                RagscaleStatus::NumericalError
            }
        }
    })
}

/// Releases a fit handle.
///
/// # Safety
/// `fit` must be a handle from `ragscale_fit` or null; it must not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn ragscale_fit_free(fit: *mut RagscaleFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Optimal split of `budget` tokens between pretraining (`out_d`) and the
/// retrieval store (`out_r`) for a model of `n` parameters; `out_loss`
/// receives the predicted loss. `resolution` of 0 selects the default
/// (512) and `d_min` of 0 selects the default (1e6).
///
/// # Safety
/// `params` must be readable; the out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn ragscale_optimize_split(
    params: *const RagscaleLawParams,
    n: f64,
    budget: f64,
    d_min: f64,
    resolution: usize,
    out_d: *mut f64,
    out_r: *mut f64,
    out_loss: *mut f64,
) -> RagscaleStatus {
    guard(|| {
        if params.is_null() || out_d.is_null() || out_r.is_null() || out_loss.is_null() {
            set_error("null argument");
            return RagscaleStatus::NullArgument;
        }
        let (base, three) = params_from_c(&*params);
        let p3 = three.unwrap_or(Params3D {
            base,
            c: 0.0,
            rate: 1.0,
            family: GainFamily::LogGain,
        });
        let d_min = if d_min > 0.0 { d_min } else { 1e6 };
        let resolution = if resolution > 0 { resolution } else { 512 };
        match allocation::optimize_split(&p3, n, budget, d_min, resolution) {
            Ok(plan) => {
                *out_d = plan.d_star;
                *out_r = plan.r_star;
                *out_loss = plan.predicted_loss;
                RagscaleStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Nested-prefix datastore selection: picks the shortest seeded-permutation
/// prefix of the catalog meeting `budget` tokens and returns the manifest
/// as JSON.
///
/// # Safety
/// `catalog_path` must be NUL-terminated; `out_json` writable. Free the
/// string with `ragscale_string_free`.
#[no_mangle]
pub unsafe extern "C" fn ragscale_select_budget(
    catalog_path: *const c_char,
    seed: u64,
    budget: u64,
    out_json: *mut *mut c_char,
) -> RagscaleStatus {
    guard(|| {
        if out_json.is_null() {
            set_error("null out pointer");
            return RagscaleStatus::NullArgument;
        }
        let path = match cstr_arg(catalog_path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let catalog = match datastore::ChunkCatalog::load(Path::new(path)) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        };
        match datastore::select_budget(&catalog, seed, budget) {
            Ok(manifest) => {
                let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
                match CString::new(json) {
                    Ok(s) => {
                        *out_json = s.into_raw();
                        RagscaleStatus::Ok
                    }
                    Err(_) => {
                        set_error("manifest contains an interior NUL");
                        RagscaleStatus::NumericalError
                    }
                }
            }
            Err(e) => fail(&e),
        }
    })
}

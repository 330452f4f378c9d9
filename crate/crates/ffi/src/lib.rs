//! C interface to `lpmbc`.
//!
//! Datasets and classifiers are opaque handles created and freed through
//! this API. Every fallible call returns an `LpmbcStatus`; on failure the
//! message is available from `lpmbc_last_error` on the same thread until
//! the next failing call. Strings returned by the library are freed with
//! `lpmbc_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lpmbc::data::{load_csv, report_json, CsvSchema};
use lpmbc::eval::{cross_test, Protocol};
use lpmbc::{Assumption, Bandwidth, Classifier, ClassifierConfig, Dataset, Error, Metric, NeighborhoodMode, Rng};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpmbcStatus {
    Ok = 0,
    InvalidInput = 1,
    Io = 2,
    Numeric = 3,
    NullPointer = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpmbcMode {
    PerClass = 0,
    Shared = 1,
    Global = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpmbcAssumption {
    Lua = 0,
    Lga = 1,
    LcaUnit = 2,
    LcaSilverman = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpmbcMetric {
    Chebychev = 0,
    Euclidean = 1,
}

/// Opaque labeled dataset.
pub struct LpmbcDataset(Dataset);

/// Opaque fitted classifier.
pub struct LpmbcClassifier(Classifier);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LpmbcStatus {
    match e.exit_code() {
        1 => LpmbcStatus::InvalidInput,
        2 => LpmbcStatus::Io,
        _ => LpmbcStatus::Numeric,
    }
}

/// Runs `f`, converting errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), (LpmbcStatus, String)>) -> LpmbcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LpmbcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LpmbcStatus::Panic
        }
    }
}

fn lib(e: Error) -> (LpmbcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (LpmbcStatus, String) {
    (LpmbcStatus::NullPointer, format!("{what} is null"))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lpmbc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a CSV file with a header row and the label in the last column.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lpmbc_dataset_load_csv(path: *const c_char, out: *mut *mut LpmbcDataset) -> LpmbcStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (LpmbcStatus::InvalidInput, "path is not UTF-8".to_string()))?;
        let data = load_csv(path, &CsvSchema::default()).map_err(lib)?;
        *out = Box::into_raw(Box::new(LpmbcDataset(data)));
        Ok(())
    })
}

/// Builds a dataset from `n` row-major rows of `d` features and `n` class
/// indices in `0..n_classes`. Classes are named "0", "1", ...
///
/// # Safety
/// `features` must point to `n * d` doubles, `labels` to `n` values and
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lpmbc_dataset_from_arrays(
    features: *const f64,
    labels: *const u32,
    n: usize,
    d: usize,
    n_classes: usize,
    out: *mut *mut LpmbcDataset,
) -> LpmbcStatus {
    guard(|| {
        if features.is_null() || labels.is_null() {
            return Err(null("features or labels"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let f = std::slice::from_raw_parts(features, n * d).to_vec();
        let l = std::slice::from_raw_parts(labels, n).iter().map(|&v| v as usize).collect();
        let data = Dataset::new(
            f,
            d,
            l,
            (0..n_classes).map(|c| c.to_string()).collect(),
            (1..=d).map(|j| format!("f{j}")).collect(),
        )
        .map_err(lib)?;
        *out = Box::into_raw(Box::new(LpmbcDataset(data)));
        Ok(())
    })
}

/// Writes the sample, feature and class counts. Any output may be null.
///
/// # Safety
/// `data` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn lpmbc_dataset_shape(
    data: *const LpmbcDataset,
    n: *mut usize,
    d: *mut usize,
    n_classes: *mut usize,
) -> LpmbcStatus {
    guard(|| {
        let data = data.as_ref().ok_or_else(|| null("data"))?;
        if let Some(n) = n.as_mut() {
            *n = data.0.n_samples();
        }
        if let Some(d) = d.as_mut() {
            *d = data.0.n_features();
        }
        if let Some(c) = n_classes.as_mut() {
            *c = data.0.n_classes();
        }
        Ok(())
    })
}

/// # Safety
/// `data` must come from this library (or be null) and not be used again.
#[no_mangle]
pub unsafe extern "C" fn lpmbc_dataset_free(data: *mut LpmbcDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Fits a classifier on a copy of `data`. `k` is ignored in global mode.
/// With `standardize` set, features are scaled to zero mean and unit
/// variance on the training data and queries get the same transform.
///
/// # Safety
/// `data` must be a live dataset handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lpmbc_classifier_new(
    data: *const LpmbcDataset,
    mode: LpmbcMode,
    k: usize,
    assumption: LpmbcAssumption,
    metric: LpmbcMetric,
    standardize: bool,
    out: *mut *mut LpmbcClassifier,
) -> LpmbcStatus {
    guard(|| {
        let data = data.as_ref().ok_or_else(|| null("data"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mode = match mode {
            LpmbcMode::PerClass => NeighborhoodMode::PerClass { k },
            LpmbcMode::Shared => NeighborhoodMode::Shared { k },
            LpmbcMode::Global => NeighborhoodMode::Global,
        };
        let assumption = match assumption {
            LpmbcAssumption::Lua => Assumption::Lua,
            LpmbcAssumption::Lga => Assumption::LGA,
            LpmbcAssumption::LcaUnit => Assumption::lca(Bandwidth::Unit),
            LpmbcAssumption::LcaSilverman => Assumption::lca(Bandwidth::Silverman),
        };
        let metric = match metric {
            LpmbcMetric::Chebychev => Metric::Chebychev,
            LpmbcMetric::Euclidean => Metric::Euclidean,
        };
        let config = ClassifierConfig::new(mode, assumption, metric).map_err(lib)?;
        let clf = Classifier::fit(data.0.clone(), config, standardize).map_err(lib)?;
        *out = Box::into_raw(Box::new(LpmbcClassifier(clf)));
        Ok(())
    })
}

/// Classifies one query of `d` features. Writes the class index to `label`
/// and, when `posteriors` is not null, the `n_classes` posteriors.
///
/// # Safety
/// `query` must point to `d` doubles, `posteriors` (if not null) to room
/// for `n_classes` doubles, and `label` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lpmbc_classifier_predict(
    clf: *const LpmbcClassifier,
    query: *const f64,
    d: usize,
    label: *mut usize,
    posteriors: *mut f64,
    n_classes: usize,
) -> LpmbcStatus {
    guard(|| {
        let clf = clf.as_ref().ok_or_else(|| null("classifier"))?;
        if query.is_null() || label.is_null() {
            return Err(null("query or label"));
        }
        let q = std::slice::from_raw_parts(query, d);
        let p = clf.0.predict(q).map_err(lib)?;
        if !posteriors.is_null() {
            if n_classes != p.posteriors.len() {
                return Err((
                    LpmbcStatus::InvalidInput,
                    format!("posterior buffer holds {n_classes}, model has {} classes", p.posteriors.len()),
                ));
            }
            std::slice::from_raw_parts_mut(posteriors, n_classes).copy_from_slice(&p.posteriors);
        }
        *label = p.label;
        Ok(())
    })
}

/// # Safety
/// `clf` must come from this library (or be null) and not be used again.
#[no_mangle]
pub unsafe extern "C" fn lpmbc_classifier_free(clf: *mut LpmbcClassifier) {
    if !clf.is_null() {
        drop(Box::from_raw(clf));
    }
}

/// Runs the repeated cross test with inner model selection (per-class
/// Chebychev neighborhoods, all three assumptions) and returns the report
/// as a JSON string to be freed with `lpmbc_string_free`.
///
/// # Safety
/// `data` must be a live dataset handle and `json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lpmbc_bench_json(
    data: *const LpmbcDataset,
    folds: usize,
    repeats: usize,
    seed: u64,
    json: *mut *mut c_char,
) -> LpmbcStatus {
    guard(|| {
        let data = data.as_ref().ok_or_else(|| null("data"))?;
        if json.is_null() {
            return Err(null("json"));
        }
        let protocol = Protocol {
            folds,
            repeats,
            ..Protocol::default()
        };
        let report = cross_test(&data.0, "data", &protocol, &Rng::new(seed)).map_err(lib)?;
        let text = report_json(&report).map_err(lib)?;
        *json = CString::new(text).expect("json has no nul").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library (or be null) and not be used again.
#[no_mangle]
pub unsafe extern "C" fn lpmbc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

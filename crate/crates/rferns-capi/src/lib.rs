//! C ABI for the rferns library.
//!
//! Handles are opaque pointers created and freed by this library; every
//! fallible call returns an [`rferns_status`] and stores a human-readable
//! message retrievable with [`rferns_last_error_message`]. Strings returned
//! by this library must be released with [`rferns_string_free`].
//!
//! The generated header lives at `include/rferns.h`.

#![allow(non_camel_case_types)]
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use rferns::boruta::{boruta_run, Budget, BorutaConfig, BorutaResult, Decision};
use rferns::dataset::{Column, Dataset};
use rferns::error::Error;
use rferns::importance::{compute_importance, ImportanceReport};
use rferns::model::{train, FernModel, Hyper};

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum rferns_status {
    RFERNS_OK = 0,
    RFERNS_NULL_POINTER = 1,
    RFERNS_INVALID_ARGUMENT = 2,
    RFERNS_INVALID_UTF8 = 3,
    RFERNS_RUNTIME_ERROR = 4,
    /// The requested quantity is undefined for this input (for example an
    /// out-of-bag error when no object is ever out of bag).
    RFERNS_UNDEFINED = 5,
}

use rferns_status::*;

/// Opaque dataset handle.
pub struct rferns_dataset {
    inner: Dataset,
}

/// Opaque trained-model handle.
pub struct rferns_model {
    inner: FernModel,
}

/// Opaque importance-report handle.
pub struct rferns_report {
    inner: ImportanceReport,
}

/// Opaque Boruta-result handle.
pub struct rferns_boruta_result {
    inner: BorutaResult,
}

/// Importance record of one attribute.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct rferns_attr_importance {
    /// Regular permutation importance (I).
    pub regular: f64,
    /// Implicit shadow importance (J).
    pub shadow: f64,
    /// Ferns that scanned the attribute.
    pub scans: u32,
    pub selected: bool,
    pub never_scanned: bool,
}

/// Final wrapper decision for one attribute.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum rferns_decision {
    RFERNS_CONFIRMED = 0,
    RFERNS_REJECTED = 1,
    RFERNS_TENTATIVE = 2,
}

/// Boruta outcome of one attribute.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct rferns_feature_status {
    pub decision: rferns_decision,
    pub hits: u32,
    pub trials: u32,
    pub final_importance: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message).ok();
    });
}

fn status_for(e: &Error) -> rferns_status {
    if e.is_usage() {
        RFERNS_INVALID_ARGUMENT
    } else {
        RFERNS_RUNTIME_ERROR
    }
}

fn report_error(e: &Error) -> rferns_status {
    set_error(e.to_string());
    status_for(e)
}

unsafe fn cstr<'a>(p: *const c_char) -> Result<&'a str, rferns_status> {
    if p.is_null() {
        set_error("null string argument");
        return Err(RFERNS_NULL_POINTER);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        RFERNS_INVALID_UTF8
    })
}

fn guarded(f: impl FnOnce() -> rferns_status) -> rferns_status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            RFERNS_RUNTIME_ERROR
        }
    }
}

/// Message describing the most recent error on this thread, or NULL.
/// The caller owns the returned string (free with rferns_string_free).
#[no_mangle]
pub extern "C" fn rferns_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null_mut(), |s| s.clone().into_raw())
    })
}

/// Free a string returned by this library. NULL is allowed.
#[no_mangle]
pub unsafe extern "C" fn rferns_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ── datasets ────────────────────────────────────────────────────────────

/// Load a CSV file with a header row; `label_column` names the class
/// column, remaining columns are auto-typed.
#[no_mangle]
pub unsafe extern "C" fn rferns_dataset_from_csv(
    path: *const c_char,
    label_column: *const c_char,
    out: *mut *mut rferns_dataset,
) -> rferns_status {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer");
            return RFERNS_NULL_POINTER;
        }
        let (path, label) = match (cstr(path), cstr(label_column)) {
            (Ok(p), Ok(l)) => (p, l),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match Dataset::from_csv_path(Path::new(path), label, None) {
            Ok(data) => {
                *out = Box::into_raw(Box::new(rferns_dataset { inner: data }));
                RFERNS_OK
            }
            Err(e) => report_error(&e),
        }
    })
}

/// Build a dataset from a dense row-major matrix of numeric values plus
/// label codes in 0..n_classes. Attributes are named x0, x1, ...
#[no_mangle]
pub unsafe extern "C" fn rferns_dataset_from_dense(
    values: *const f64,
    n_rows: usize,
    n_cols: usize,
    labels: *const u32,
    n_classes: u32,
    out: *mut *mut rferns_dataset,
) -> rferns_status {
    guarded(|| {
        if values.is_null() || labels.is_null() || out.is_null() {
            set_error("null pointer argument");
            return RFERNS_NULL_POINTER;
        }
        let values = std::slice::from_raw_parts(values, n_rows * n_cols);
        let labels = std::slice::from_raw_parts(labels, n_rows).to_vec();
        let columns: Vec<Column> = (0..n_cols)
            .map(|j| Column::Numeric((0..n_rows).map(|i| values[i * n_cols + j]).collect()))
            .collect();
        let names = (0..n_cols).map(|j| format!("x{j}")).collect();
        let class_names = (0..n_classes).map(|c| format!("c{c}")).collect();
        match Dataset::new(names, columns, labels, class_names) {
            Ok(data) => {
                *out = Box::into_raw(Box::new(rferns_dataset { inner: data }));
                RFERNS_OK
            }
            Err(e) => report_error(&e),
        }
    })
}

#[no_mangle]
pub extern "C" fn rferns_dataset_rows(data: *const rferns_dataset) -> usize {
    if data.is_null() {
        return 0;
    }
    unsafe { (*data).inner.n_objects() }
}

#[no_mangle]
pub extern "C" fn rferns_dataset_cols(data: *const rferns_dataset) -> usize {
    if data.is_null() {
        return 0;
    }
    unsafe { (*data).inner.n_attributes() }
}

#[no_mangle]
pub extern "C" fn rferns_dataset_classes(data: *const rferns_dataset) -> usize {
    if data.is_null() {
        return 0;
    }
    unsafe { (*data).inner.n_classes() }
}

#[no_mangle]
pub unsafe extern "C" fn rferns_dataset_free(data: *mut rferns_dataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

// ── models ──────────────────────────────────────────────────────────────

/// Train an ensemble of `ferns` ferns of depth `depth`, deterministically
/// from `seed`.
#[no_mangle]
pub unsafe extern "C" fn rferns_train(
    data: *const rferns_dataset,
    depth: u32,
    ferns: u32,
    seed: u64,
    out: *mut *mut rferns_model,
) -> rferns_status {
    guarded(|| {
        if data.is_null() || out.is_null() {
            set_error("null pointer argument");
            return RFERNS_NULL_POINTER;
        }
        match train(&(*data).inner, &Hyper::new(depth, ferns, seed)) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(rferns_model { inner: model }));
                RFERNS_OK
            }
            Err(e) => report_error(&e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn rferns_model_save_json(
    model: *const rferns_model,
    path: *const c_char,
) -> rferns_status {
    guarded(|| {
        if model.is_null() {
            set_error("null model");
            return RFERNS_NULL_POINTER;
        }
        let path = match cstr(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match (*model).inner.save_json(Path::new(path)) {
            Ok(()) => RFERNS_OK,
            Err(e) => report_error(&e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn rferns_model_load_json(
    path: *const c_char,
    out: *mut *mut rferns_model,
) -> rferns_status {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer");
            return RFERNS_NULL_POINTER;
        }
        let path = match cstr(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match FernModel::load_json(Path::new(path)) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(rferns_model { inner: model }));
                RFERNS_OK
            }
            Err(e) => report_error(&e),
        }
    })
}

/// Predict class codes for every row of `data` into `out_labels`
/// (capacity must be at least the row count).
#[no_mangle]
pub unsafe extern "C" fn rferns_predict(
    model: *const rferns_model,
    data: *const rferns_dataset,
    out_labels: *mut u32,
    capacity: usize,
) -> rferns_status {
    guarded(|| {
        if model.is_null() || data.is_null() || out_labels.is_null() {
            set_error("null pointer argument");
            return RFERNS_NULL_POINTER;
        }
        let dataset = &(*data).inner;
        if capacity < dataset.n_objects() {
            set_error(format!(
                "output capacity {capacity} below row count {}",
                dataset.n_objects()
            ));
            return RFERNS_INVALID_ARGUMENT;
        }
        match (*model).inner.predict(dataset) {
            Ok(labels) => {
                std::ptr::copy_nonoverlapping(labels.as_ptr(), out_labels, labels.len());
                RFERNS_OK
            }
            Err(e) => report_error(&e),
        }
    })
}

/// Out-of-bag error of a model on its training data. Returns
/// RFERNS_UNDEFINED when no object has an out-of-bag fern.
#[no_mangle]
pub unsafe extern "C" fn rferns_oob_error(
    model: *const rferns_model,
    data: *const rferns_dataset,
    out: *mut f64,
) -> rferns_status {
    guarded(|| {
        if model.is_null() || data.is_null() || out.is_null() {
            set_error("null pointer argument");
            return RFERNS_NULL_POINTER;
        }
        match (*model).inner.oob_error(&(*data).inner) {
            Ok(Some(err)) => {
                *out = err;
                RFERNS_OK
            }
            Ok(None) => {
                set_error("out-of-bag error undefined: no object is ever out of bag");
                RFERNS_UNDEFINED
            }
            Err(e) => report_error(&e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn rferns_model_free(model: *mut rferns_model) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

// ── importance ──────────────────────────────────────────────────────────

/// Fern count needed for roughly `target_scans` considerations of each of
/// `n_attributes` attributes at the given depth.
#[no_mangle]
pub unsafe extern "C" fn rferns_ferns_for_scans(
    n_attributes: usize,
    depth: u32,
    target_scans: u32,
    out: *mut u32,
) -> rferns_status {
    guarded(|| {
        if out.is_null() {
            set_error("null output pointer");
            return RFERNS_NULL_POINTER;
        }
        if n_attributes < 1 || depth < 1 || target_scans < 1 {
            set_error("n_attributes, depth and target_scans must all be at least 1");
            return RFERNS_INVALID_ARGUMENT;
        }
        *out = rferns::importance::ferns_for_scans(n_attributes, depth, target_scans);
        RFERNS_OK
    })
}

/// Train and compute the importance report in one pass.
#[no_mangle]
pub unsafe extern "C" fn rferns_importance(
    data: *const rferns_dataset,
    depth: u32,
    ferns: u32,
    seed: u64,
    out: *mut *mut rferns_report,
) -> rferns_status {
    guarded(|| {
        if data.is_null() || out.is_null() {
            set_error("null pointer argument");
            return RFERNS_NULL_POINTER;
        }
        match compute_importance(&(*data).inner, &Hyper::new(depth, ferns, seed)) {
            Ok((_, report)) => {
                *out = Box::into_raw(Box::new(rferns_report { inner: report }));
                RFERNS_OK
            }
            Err(e) => report_error(&e),
        }
    })
}

#[no_mangle]
pub extern "C" fn rferns_report_len(report: *const rferns_report) -> usize {
    if report.is_null() {
        return 0;
    }
    unsafe { (*report).inner.attributes.len() }
}

#[no_mangle]
pub unsafe extern "C" fn rferns_report_entry(
    report: *const rferns_report,
    index: usize,
    out: *mut rferns_attr_importance,
) -> rferns_status {
    guarded(|| {
        if report.is_null() || out.is_null() {
            set_error("null pointer argument");
            return RFERNS_NULL_POINTER;
        }
        let attributes = &(*report).inner.attributes;
        let Some(attr) = attributes.get(index) else {
            set_error(format!("attribute index {index} out of range"));
            return RFERNS_INVALID_ARGUMENT;
        };
        *out = rferns_attr_importance {
            regular: attr.regular,
            shadow: attr.shadow,
            scans: attr.scans,
            selected: attr.selected,
            never_scanned: attr.never_scanned,
        };
        RFERNS_OK
    })
}

/// Attribute name; the caller owns the returned string.
#[no_mangle]
pub unsafe extern "C" fn rferns_report_attr_name(
    report: *const rferns_report,
    index: usize,
) -> *mut c_char {
    if report.is_null() {
        return std::ptr::null_mut();
    }
    let attributes = &(*report).inner.attributes;
    attributes
        .get(index)
        .and_then(|a| CString::new(a.name.clone()).ok())
        .map_or(std::ptr::null_mut(), CString::into_raw)
}

/// Maximum shadow importance over scanned attributes. RFERNS_UNDEFINED
/// when nothing was scanned.
#[no_mangle]
pub unsafe extern "C" fn rferns_report_max_shadow(
    report: *const rferns_report,
    out: *mut f64,
) -> rferns_status {
    guarded(|| {
        if report.is_null() || out.is_null() {
            set_error("null pointer argument");
            return RFERNS_NULL_POINTER;
        }
        match (*report).inner.max_shadow {
            Some(v) => {
                *out = v;
                RFERNS_OK
            }
            None => {
                set_error("max shadow importance undefined: no attribute was scanned");
                RFERNS_UNDEFINED
            }
        }
    })
}

#[no_mangle]
pub extern "C" fn rferns_report_selected_count(report: *const rferns_report) -> usize {
    if report.is_null() {
        return 0;
    }
    let attributes = unsafe { &(*report).inner.attributes };
    attributes.iter().filter(|a| a.selected).count()
}

#[no_mangle]
pub unsafe extern "C" fn rferns_report_save_json(
    report: *const rferns_report,
    path: *const c_char,
) -> rferns_status {
    guarded(|| {
        if report.is_null() {
            set_error("null report");
            return RFERNS_NULL_POINTER;
        }
        let path = match cstr(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let json = match (*report).inner.to_json_string() {
            Ok(j) => j,
            Err(e) => return report_error(&e),
        };
        match std::fs::write(path, json) {
            Ok(()) => RFERNS_OK,
            Err(e) => report_error(&Error::Io(e)),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn rferns_report_save_csv(
    report: *const rferns_report,
    path: *const c_char,
) -> rferns_status {
    guarded(|| {
        if report.is_null() {
            set_error("null report");
            return RFERNS_NULL_POINTER;
        }
        let path = match cstr(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let mut file = match std::fs::File::create(path) {
            Ok(f) => f,
            Err(e) => return report_error(&Error::Io(e)),
        };
        match (*report).inner.write_csv(&mut file) {
            Ok(()) => RFERNS_OK,
            Err(e) => report_error(&e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn rferns_report_free(report: *mut rferns_report) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

// ── boruta ──────────────────────────────────────────────────────────────

/// Run the Boruta-style wrapper. `target_scans` sets the per-iteration
/// ensemble budget; `bonferroni` toggles the multiple-testing correction.
#[no_mangle]
pub unsafe extern "C" fn rferns_boruta(
    data: *const rferns_dataset,
    depth: u32,
    target_scans: u32,
    seed: u64,
    max_iterations: u32,
    alpha: f64,
    bonferroni: bool,
    out: *mut *mut rferns_boruta_result,
) -> rferns_status {
    guarded(|| {
        if data.is_null() || out.is_null() {
            set_error("null pointer argument");
            return RFERNS_NULL_POINTER;
        }
        let cfg = BorutaConfig {
            max_iterations,
            alpha,
            bonferroni,
            depth,
            budget: Budget::Scans(target_scans),
            seed,
        };
        match boruta_run(&(*data).inner, &cfg) {
            Ok(result) => {
                *out = Box::into_raw(Box::new(rferns_boruta_result { inner: result }));
                RFERNS_OK
            }
            Err(e) => report_error(&e),
        }
    })
}

#[no_mangle]
pub extern "C" fn rferns_boruta_len(result: *const rferns_boruta_result) -> usize {
    if result.is_null() {
        return 0;
    }
    unsafe { (*result).inner.statuses.len() }
}

#[no_mangle]
pub unsafe extern "C" fn rferns_boruta_entry(
    result: *const rferns_boruta_result,
    index: usize,
    out: *mut rferns_feature_status,
) -> rferns_status {
    guarded(|| {
        if result.is_null() || out.is_null() {
            set_error("null pointer argument");
            return RFERNS_NULL_POINTER;
        }
        let statuses = &(*result).inner.statuses;
        let Some(status) = statuses.get(index) else {
            set_error(format!("attribute index {index} out of range"));
            return RFERNS_INVALID_ARGUMENT;
        };
        *out = rferns_feature_status {
            decision: match status.status {
                Decision::Confirmed => rferns_decision::RFERNS_CONFIRMED,
                Decision::Rejected => rferns_decision::RFERNS_REJECTED,
                Decision::Tentative => rferns_decision::RFERNS_TENTATIVE,
            },
            hits: status.hits,
            trials: status.trials,
            final_importance: status.final_importance,
        };
        RFERNS_OK
    })
}

/// Attribute name; the caller owns the returned string.
#[no_mangle]
pub unsafe extern "C" fn rferns_boruta_attr_name(
    result: *const rferns_boruta_result,
    index: usize,
) -> *mut c_char {
    if result.is_null() {
        return std::ptr::null_mut();
    }
    let statuses = &(*result).inner.statuses;
    statuses
        .get(index)
        .and_then(|s| CString::new(s.name.clone()).ok())
        .map_or(std::ptr::null_mut(), CString::into_raw)
}

#[no_mangle]
pub unsafe extern "C" fn rferns_boruta_free(result: *mut rferns_boruta_result) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

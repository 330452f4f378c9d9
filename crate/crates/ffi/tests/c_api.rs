use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::ptr;

use lpmbc_ffi::*;

fn last_error() -> String {
    let p = lpmbc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn toy() -> *mut LpmbcDataset {
    let features = [0.0, 0.0, 0.2, 0.1, 0.1, 0.3, 3.0, 3.0, 3.2, 2.9, 2.8, 3.1];
    let labels = [0u32, 0, 0, 1, 1, 1];
    let mut ds = ptr::null_mut();
    let st = unsafe { lpmbc_dataset_from_arrays(features.as_ptr(), labels.as_ptr(), 6, 2, 2, &mut ds) };
    assert_eq!(st, LpmbcStatus::Ok);
    ds
}

#[test]
fn classify_through_handles() {
    let ds = toy();
    let (mut n, mut d, mut c) = (0, 0, 0);
    assert_eq!(unsafe { lpmbc_dataset_shape(ds, &mut n, &mut d, &mut c) }, LpmbcStatus::Ok);
    assert_eq!((n, d, c), (6, 2, 2));

    let mut clf = ptr::null_mut();
    let st = unsafe {
        lpmbc_classifier_new(ds, LpmbcMode::PerClass, 2, LpmbcAssumption::Lga, LpmbcMetric::Chebychev, true, &mut clf)
    };
    assert_eq!(st, LpmbcStatus::Ok);
    let mut label = usize::MAX;
    let mut post = [0.0; 2];
    let st = unsafe { lpmbc_classifier_predict(clf, [2.9, 3.0].as_ptr(), 2, &mut label, post.as_mut_ptr(), 2) };
    assert_eq!(st, LpmbcStatus::Ok);
    assert_eq!(label, 1);
    assert!((post[0] + post[1] - 1.0).abs() < 1e-12);

    let st = unsafe { lpmbc_classifier_predict(clf, [0.0, 0.0].as_ptr(), 2, &mut label, post.as_mut_ptr(), 3) };
    assert_eq!(st, LpmbcStatus::InvalidInput);
    assert!(last_error().contains("posterior buffer"));

    unsafe {
        lpmbc_classifier_free(clf);
        lpmbc_dataset_free(ds);
    }
}

#[test]
fn errors_map_to_codes() {
    let ds = toy();
    let mut clf = ptr::null_mut();
    let st = unsafe {
        lpmbc_classifier_new(ds, LpmbcMode::Global, 1, LpmbcAssumption::Lua, LpmbcMetric::Chebychev, false, &mut clf)
    };
    assert_eq!(st, LpmbcStatus::InvalidInput);
    assert!(clf.is_null());

    let st = unsafe {
        lpmbc_classifier_new(ds, LpmbcMode::PerClass, 5, LpmbcAssumption::Lua, LpmbcMetric::Chebychev, false, &mut clf)
    };
    assert_eq!(st, LpmbcStatus::Ok);
    let mut label = 0;
    let st = unsafe { lpmbc_classifier_predict(clf, [0.0, 0.0].as_ptr(), 2, &mut label, ptr::null_mut(), 0) };
    assert_eq!(st, LpmbcStatus::Numeric);
    assert!(last_error().contains("infeasible"));

    let missing = CString::new("/no/such/file.csv").unwrap();
    let mut other = ptr::null_mut();
    assert_eq!(unsafe { lpmbc_dataset_load_csv(missing.as_ptr(), &mut other) }, LpmbcStatus::Io);
    assert_eq!(unsafe { lpmbc_dataset_load_csv(ptr::null(), &mut other) }, LpmbcStatus::NullPointer);
    assert_eq!(unsafe { lpmbc_dataset_shape(ptr::null(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()) }, LpmbcStatus::NullPointer);

    unsafe {
        lpmbc_classifier_free(clf);
        lpmbc_dataset_free(ds);
        lpmbc_dataset_free(ptr::null_mut());
    }
}

#[test]
fn bench_returns_json() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/iris.csv");
    let path = CString::new(path.to_str().unwrap()).unwrap();
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { lpmbc_dataset_load_csv(path.as_ptr(), &mut ds) }, LpmbcStatus::Ok);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { lpmbc_bench_json(ds, 5, 1, 3, &mut json) }, LpmbcStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    assert!(text.contains("\"aggregates\""));
    assert!(text.contains("\"mean_acc\""));
    unsafe {
        lpmbc_string_free(json);
        lpmbc_dataset_free(ds);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/lpmbc.h")).unwrap();
    for name in [
        "lpmbc_last_error",
        "lpmbc_dataset_load_csv",
        "lpmbc_dataset_from_arrays",
        "lpmbc_dataset_shape",
        "lpmbc_dataset_free",
        "lpmbc_classifier_new",
        "lpmbc_classifier_predict",
        "lpmbc_classifier_free",
        "lpmbc_bench_json",
        "lpmbc_string_free",
        "typedef struct LpmbcDataset LpmbcDataset",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

use std::ffi::{CStr, CString};
use std::ptr;

use urnwalk_ffi::*;

const CONFIG: &str = "
[model]
p = 1
q = 0.5
q1 = 0.75
q2 = 0.75
init_len = 10
[reinforcement]
kind = affine
c0 = 0.5
a = 0.3333333333333333
b = -0.3333333333333333
[law]
kind = fixed
k = 5
[run]
n_max = 2000
replications = 20
seed = 9
[analysis]
check_strong_law = true
";

fn model(text: &str) -> *mut UwModel {
    let c = CString::new(text).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { uw_model_new(c.as_ptr(), &mut m) }, UwStatus::Ok);
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    let p = uw_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(uw_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn fixed_point_and_asymptotics() {
    let m = model(CONFIG);
    let mut fp = UwFixedPoint::default();
    assert_eq!(unsafe { uw_fixed_point(m, &mut fp) }, UwStatus::Ok);
    assert!((fp.x - 0.375).abs() < 1e-12 && (fp.y - 0.375).abs() < 1e-12 && (fp.z - 0.125).abs() < 1e-12);
    assert!((fp.kappa - 0.5).abs() < 1e-12);

    let mut a = std::mem::MaybeUninit::<UwAsymptotics>::uninit();
    assert_eq!(unsafe { uw_asymptotics(m, a.as_mut_ptr()) }, UwStatus::Ok);
    let a = unsafe { a.assume_init() };
    assert_eq!(a.regime, UwRegime::D1Critical);
    assert!(a.log_correction && a.has_sigma && !a.has_direction);
    assert!((a.sigma[0] - 0.1875).abs() < 1e-12 && (a.sigma[8] - 0.0625 / 3.0).abs() < 1e-12);
    unsafe { uw_model_free(m) };
}

#[test]
fn operators_and_g() {
    let m = model(CONFIG);
    let mut v = 0.0;
    assert_eq!(unsafe { uw_g_eval(m, 0.4, 0.1, &mut v) }, UwStatus::Ok);
    assert!((v - 0.6).abs() < 1e-15);
    // affine g is reproduced exactly
    assert_eq!(unsafe { uw_h0_eval(m, 0.4, 0.1, &mut v) }, UwStatus::Ok);
    assert!((v - 0.6).abs() < 1e-12);
    assert_eq!(unsafe { uw_hn_eval(m, 50, 0.4, 0.1, &mut v) }, UwStatus::Ok);
    assert!((v - 0.6).abs() < 1e-12);
    assert_eq!(unsafe { uw_g_eval(m, 0.8, 0.8, &mut v) }, UwStatus::Domain);
    assert!(last_error().contains("domain"));
    unsafe { uw_model_free(m) };
}

#[test]
fn simulate_is_reproducible() {
    let m = model(CONFIG);
    let mut a = UwEnsembleSummary::default();
    let mut b = UwEnsembleSummary::default();
    assert_eq!(unsafe { uw_simulate(m, &mut a) }, UwStatus::Ok);
    assert_eq!(unsafe { uw_simulate(m, &mut b) }, UwStatus::Ok);
    assert_eq!(a.n, 2000);
    assert_eq!(a.replications, 20);
    assert!(a.has_deviation);
    assert_eq!(a.mean, b.mean);
    assert_eq!(a.deviation_cov, b.deviation_cov);
    unsafe { uw_model_free(m) };
}

#[test]
fn run_experiment_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let m = model(CONFIG);
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut status = -1;
    assert_eq!(unsafe { uw_run_experiment(m, out.as_ptr(), &mut status) }, UwStatus::Ok);
    assert_eq!(status, 0);
    for f in ["report.json", "summary.txt", "checkpoints.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    unsafe { uw_model_free(m) };
}

#[test]
fn errors_map_to_status_codes() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { uw_model_new(ptr::null(), &mut m) }, UwStatus::NullPointer);
    let bad = CString::new(CONFIG.replace("q1 = 0.75\n", "")).unwrap();
    assert_eq!(unsafe { uw_model_new(bad.as_ptr(), &mut m) }, UwStatus::Config);
    assert!(last_error().contains("q1"));
    assert!(m.is_null());

    let uniform = model(&CONFIG.replace("kind = fixed\nk = 5", "kind = uniform"));
    let mut v = 0.0;
    // H_0 needs a fixed law
    assert_ne!(unsafe { uw_h0_eval(uniform, 0.2, 0.2, &mut v) }, UwStatus::Ok);
    assert_eq!(unsafe { uw_fixed_point(uniform, ptr::null_mut()) }, UwStatus::NullPointer);
    assert_eq!(unsafe { uw_fixed_point(ptr::null(), &mut UwFixedPoint::default()) }, UwStatus::NullPointer);
    unsafe { uw_model_free(uniform) };
    unsafe { uw_model_free(ptr::null_mut()) };
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/urnwalk.h")).unwrap();
    for name in [
        "uw_model_new",
        "uw_model_free",
        "uw_fixed_point",
        "uw_asymptotics",
        "uw_simulate",
        "uw_run_experiment",
        "uw_g_eval",
        "uw_h0_eval",
        "uw_hn_eval",
        "uw_last_error_message",
        "uw_version",
        "UW_STATUS_NULL_POINTER",
        "typedef struct UwModel UwModel",
    ] {
        assert!(h.contains(name), "{name}");
    }
}

use std::ffi::{CStr, CString};
use std::ptr;

use qca_ffi::*;

fn last_error() -> String {
    let p = qca_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn rules(v: [f64; 6]) -> *mut QcaRules {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { qca_rules_new(v.as_ptr(), 6, QcaUnits::Pi, 0.0, &mut out) }, QcaStatus::Ok);
    out
}

fn state(bits: &str) -> *mut QcaState {
    let bits = CString::new(bits).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { qca_state_from_bitstring(bits.as_ptr(), QcaBoundary::Open, &mut out) }, QcaStatus::Ok);
    out
}

#[test]
fn blockade_step_through_handles() {
    let r = rules([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let s = state("000");
    unsafe {
        assert_eq!(qca_rules_is_unitary(r), 1);
        assert_eq!(qca_state_n_sites(s), 3);
        assert_eq!(qca_state_discrete_steps(s, r, r, 1), QcaStatus::Ok);
        let mut z = [0.0; 3];
        assert_eq!(qca_state_magnetization(s, z.as_mut_ptr(), 3), QcaStatus::Ok);
        for (got, want) in z.iter().zip([1.0, -1.0, 1.0]) {
            assert!((got - want).abs() < 1e-7);
        }
        qca_state_free(s);
        qca_rules_free(r);
    }
}

#[test]
fn continuous_rabi_and_steady_state() {
    let r = rules([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let s = state("0");
    unsafe {
        assert_eq!(qca_state_evolve(s, r, 1.0), QcaStatus::Ok);
        let mut z = [0.0];
        qca_state_magnetization(s, z.as_mut_ptr(), 1);
        assert!((z[0] - 1.0).abs() < 1e-8);

        let depump = rules([0.0, 0.0, 0.0, 2.0, 2.0, 2.0]);
        let (mut conv, mut res) = (0, 0.0);
        assert_eq!(qca_state_steady(s, depump, 1e-8, 500.0, &mut conv, &mut res), QcaStatus::Ok);
        assert_eq!(conv, 1);
        assert!(res < 1e-8);
        let mut cov = 1.0;
        assert_eq!(qca_state_mean_nn_covariance(s, &mut cov), QcaStatus::Ok);
        assert_eq!(cov, 0.0);
        qca_rules_free(depump);
        qca_state_free(s);
        qca_rules_free(r);
    }
}

#[test]
fn ghz_fidelity_of_superposition() {
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(qca_state_central_superposition(1, QcaBoundary::Open, &mut s), QcaStatus::Ok);
        let (mut f, mut phase) = (0.0, 1.0);
        assert_eq!(qca_state_ghz_fidelity(s, &mut f, &mut phase), QcaStatus::Ok);
        assert!((f - 1.0).abs() < 1e-12);
        assert!(phase.abs() < 1e-12);
        qca_state_free(s);
    }
}

#[test]
fn errors_are_reported() {
    let mut r = ptr::null_mut();
    let short = [1.0, 2.0];
    unsafe {
        assert_eq!(qca_rules_new(short.as_ptr(), 2, QcaUnits::Pi, 0.0, &mut r), QcaStatus::InvalidArgument);
        assert!(r.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(qca_rules_new(ptr::null(), 6, QcaUnits::Pi, 0.0, &mut r), QcaStatus::NullPointer);

        let bad = CString::new("01x").unwrap();
        let mut s = ptr::null_mut();
        assert_eq!(qca_state_from_bitstring(bad.as_ptr(), QcaBoundary::Open, &mut s), QcaStatus::InvalidArgument);
        assert_eq!(qca_state_central_superposition(4, QcaBoundary::Open, &mut s), QcaStatus::InvalidArgument);

        let s = state("01");
        let mut z = [0.0; 3];
        assert_eq!(qca_state_magnetization(s, z.as_mut_ptr(), 3), QcaStatus::InvalidArgument);
        assert!(last_error().contains("3"));
        assert_eq!(qca_state_evolve(s, ptr::null(), 1.0), QcaStatus::NullPointer);
        qca_state_free(s);
        qca_state_free(ptr::null_mut());
        qca_rules_free(ptr::null_mut());
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(qca_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/qca.h")).unwrap();
    for name in [
        "qca_last_error",
        "qca_version",
        "qca_rules_new",
        "qca_rules_free",
        "qca_rules_is_unitary",
        "qca_state_from_bitstring",
        "qca_state_central_superposition",
        "qca_state_free",
        "qca_state_n_sites",
        "qca_state_magnetization",
        "qca_state_evolve",
        "qca_state_discrete_steps",
        "qca_state_steady",
        "qca_state_mean_nn_covariance",
        "qca_state_ghz_fidelity",
        "QCA_STATUS_NUMERICAL",
        "typedef struct QcaState QcaState",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

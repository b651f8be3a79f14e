use std::ffi::{CStr, CString};
use std::ptr;

use ccmeasure_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ccm_last_error()) }.to_string_lossy().into_owned()
}

fn toy() -> *mut CcmProblem {
    let id = CString::new("toy1d").unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { ccm_problem_new(id.as_ptr(), &mut p) }, CcmStatus::Ok);
    assert!(!p.is_null());
    p
}

#[test]
fn problem_handle_round_trip() {
    let p = toy();
    let (mut n, mut s, mut m, mut alpha) = (0, 0, 0, 0.0);
    unsafe {
        assert_eq!(ccm_problem_info(p, &mut n, &mut s, &mut m, &mut alpha), CcmStatus::Ok);
        assert_eq!((n, s, m, alpha), (1, 1, 1, 0.05));
        let mut c = 0.0;
        assert_eq!(ccm_problem_cost(p, [1.0].as_ptr(), 1, &mut c), CcmStatus::Ok);
        assert!((c + 0.56).abs() < 1e-12);
        let mut h = [0.0];
        assert_eq!(
            ccm_problem_constraint(p, [0.5].as_ptr(), 1, [0.25].as_ptr(), 1, h.as_mut_ptr(), 1),
            CcmStatus::Ok
        );
        assert_eq!(h[0], 0.25 + 0.25 - 2.0);
        let (mut lo, mut hi) = ([0.0], [0.0]);
        assert_eq!(ccm_problem_bounds(p, lo.as_mut_ptr(), hi.as_mut_ptr(), 1), CcmStatus::Ok);
        assert_eq!((lo[0], hi[0]), (-1.0, 1.0));
        assert_eq!(ccm_problem_set_alpha(p, 0.2), CcmStatus::Ok);
        assert_eq!(ccm_problem_info(p, &mut n, &mut s, &mut m, &mut alpha), CcmStatus::Ok);
        assert_eq!(alpha, 0.2);
        ccm_problem_free(p);
    }
}

#[test]
fn error_codes_and_messages() {
    let bad = CString::new("no-such-problem").unwrap();
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(ccm_problem_new(bad.as_ptr(), &mut p), CcmStatus::Domain);
        assert!(p.is_null());
        assert!(last_error().contains("no-such-problem"));
        assert_eq!(ccm_problem_new(ptr::null(), &mut p), CcmStatus::NullArgument);
        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(ccm_problem_new(invalid.as_ptr().cast(), &mut p), CcmStatus::InvalidUtf8);

        let p = toy();
        let mut c = 0.0;
        assert_eq!(ccm_problem_cost(p, [3.0].as_ptr(), 1, &mut c), CcmStatus::Domain);
        assert!(last_error().contains("outside"));
        assert_eq!(ccm_problem_cost(p, [0.0, 0.0].as_ptr(), 2, &mut c), CcmStatus::Domain);
        assert_eq!(ccm_problem_set_alpha(p, 1.5), CcmStatus::Domain);
        assert_eq!(ccm_problem_cost(ptr::null(), [0.0].as_ptr(), 1, &mut c), CcmStatus::NullArgument);
        ccm_problem_free(p);
        ccm_problem_free(ptr::null_mut());
    }
}

#[test]
fn lp_matches_oracle() {
    let costs = [3.0, 1.0, 0.0, 2.0];
    let q = [1.0, 0.8, 0.5, 0.97];
    unsafe {
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(ccm_lp_solve(costs.as_ptr(), q.as_ptr(), 4, 0.05, &mut a), CcmStatus::Ok);
        assert_eq!(ccm_lp_solve_oracle(costs.as_ptr(), q.as_ptr(), 4, 0.05, &mut b), CcmStatus::Ok);
        assert_eq!(ccm_lp_is_optimal(a), 1);
        let (mut va, mut vb) = (0.0, 0.0);
        assert_eq!(ccm_lp_objective(a, &mut va), CcmStatus::Ok);
        assert_eq!(ccm_lp_objective(b, &mut vb), CcmStatus::Ok);
        assert!((va - vb).abs() < 1e-9);
        // Mixing samples 1 (q 0.8) and 3 (q 0.97) at level 0.95.
        let w = (0.95 - 0.8) / (0.97 - 0.8);
        assert!((va - (w * 2.0 + (1.0 - w) * 1.0)).abs() < 1e-9);
        let len = ccm_lp_support_len(a);
        assert_eq!(len, 2);
        let mut total = 0.0;
        let mut level = 0.0;
        for k in 0..len {
            let (mut i, mut wt) = (0, 0.0);
            assert_eq!(ccm_lp_atom(a, k, &mut i, &mut wt), CcmStatus::Ok);
            total += wt;
            level += wt * q[i];
        }
        assert!((total - 1.0).abs() < 1e-12);
        assert!((level - 0.95).abs() < 1e-10);
        let (mut i, mut wt) = (0, 0.0);
        assert_eq!(ccm_lp_atom(a, len, &mut i, &mut wt), CcmStatus::Domain);
        ccm_lp_free(a);
        ccm_lp_free(b);
    }
}

#[test]
fn infeasible_lp_and_baseline() {
    let costs = [1.0, 2.0];
    let q = [0.5, 0.6];
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(ccm_lp_solve(costs.as_ptr(), q.as_ptr(), 2, 0.05, &mut h), CcmStatus::Ok);
        assert_eq!(ccm_lp_is_optimal(h), 0);
        assert_eq!(ccm_lp_support_len(h), 0);
        let mut v = 0.0;
        assert_eq!(ccm_lp_objective(h, &mut v), CcmStatus::Infeasible);
        ccm_lp_free(h);

        let (mut i, mut obj) = (usize::MAX, 0.0);
        assert_eq!(
            ccm_baseline_solve(costs.as_ptr(), q.as_ptr(), 2, 0.05, &mut i, &mut obj),
            CcmStatus::Infeasible
        );
        assert_eq!(
            ccm_baseline_solve(costs.as_ptr(), q.as_ptr(), 2, 0.45, &mut i, &mut obj),
            CcmStatus::Ok
        );
        assert_eq!((i, obj), (1, 2.0));
        assert_eq!(ccm_lp_solve(costs.as_ptr(), q.as_ptr(), 2, 1.5, &mut h), CcmStatus::Domain);
    }
}

#[test]
fn satisfaction_rates() {
    let p = toy();
    let xs = [0.0, 1.0];
    let ds = [0.5, 1.5, 2.5];
    let mut q = [0.0; 2];
    unsafe {
        assert_eq!(
            ccm_problem_satisfaction(p, xs.as_ptr(), 2, ds.as_ptr(), 3, 0.0, q.as_mut_ptr()),
            CcmStatus::Ok
        );
        ccm_problem_free(p);
    }
    // x = 0 satisfies δ <= 2, x = 1 satisfies δ <= 1.
    assert_eq!(q, [2.0 / 3.0, 1.0 / 3.0]);
}

#[test]
fn solve_returns_report_json() {
    let cfg = CString::new("problem = toy1d\nmethod = sample_lp\nS = 101\nN = 400\nM = 0\n").unwrap();
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(ccm_solve_json(cfg.as_ptr(), &mut out), CcmStatus::Ok, "{}", last_error());
        let json: serde_json::Value = serde_json::from_str(CStr::from_ptr(out).to_str().unwrap()).unwrap();
        ccm_string_free(out);
        assert_eq!(json["status"], "optimal");
        assert_eq!(json["S"], 101);
        let obj = json["objective"].as_f64().unwrap();
        assert!(obj > 0.3 && obj < 0.8, "objective {obj}");

        let bad = CString::new("colour = red").unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(ccm_solve_json(bad.as_ptr(), &mut out), CcmStatus::Config);
        assert!(out.is_null());
    }
}

#[test]
fn scalar_helpers() {
    let (mut lo, mut hi) = (0.0, 0.0);
    unsafe {
        assert_eq!(ccm_wilson_interval(5, 100, &mut lo, &mut hi), CcmStatus::Ok);
        assert!(lo < 0.05 && 0.05 < hi);
        assert_eq!(ccm_wilson_interval(1, 0, &mut lo, &mut hi), CcmStatus::Domain);
        assert_eq!(CStr::from_ptr(ccm_version()).to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
    assert!((ccm_std_normal_cdf(0.0) - 0.5).abs() < 1e-15);
}

#[test]
fn errors_are_thread_local() {
    let bad = CString::new("nope").unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { ccm_problem_new(bad.as_ptr(), &mut p) }, CcmStatus::Domain);
    let other = std::thread::spawn(last_error).join().unwrap();
    assert!(other.is_empty());
    assert!(last_error().contains("nope"));
}

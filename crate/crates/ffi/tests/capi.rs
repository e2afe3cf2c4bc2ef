use std::ffi::{c_char, CString};
use std::ptr;

use fraccons_ffi::*;

const LINEAR: &str = include_str!("../../core/scenarios/linear_caputo.toml");

fn last_error() -> String {
    let n = unsafe { fc_last_error(ptr::null_mut(), 0) };
    let mut buf = vec![0u8; n + 1];
    unsafe { fc_last_error(buf.as_mut_ptr().cast::<c_char>(), buf.len()) };
    buf.truncate(n);
    String::from_utf8(buf).unwrap()
}

fn parse(text: &str) -> Result<*mut FcScenario, FcStatus> {
    let c = CString::new(text).unwrap();
    let mut sc = ptr::null_mut();
    match unsafe { fc_scenario_parse(c.as_ptr(), &mut sc) } {
        FcStatus::Ok => Ok(sc),
        s => {
            assert!(sc.is_null());
            Err(s)
        }
    }
}

#[test]
fn gamma_matches_factorial() {
    let mut v = 0.0;
    assert_eq!(unsafe { fc_gamma(5.0, &mut v) }, FcStatus::Ok);
    assert!((v - 24.0).abs() < 1e-12);
}

#[test]
fn gamma_pole_reports_numeric_status() {
    let mut v = 0.0;
    assert_eq!(unsafe { fc_gamma(-2.0, &mut v) }, FcStatus::Numeric);
    assert!(!last_error().is_empty());
}

#[test]
fn mittag_leffler_one_one_is_exp() {
    let mut v = 0.0;
    assert_eq!(unsafe { fc_mittag_leffler(1.0, 1.0, 0.7, &mut v) }, FcStatus::Ok);
    assert!((v - 0.7f64.exp()).abs() < 1e-13);
}

#[test]
fn hyp2f1_log_identity() {
    // z 2F1(1, 1; 2; z) = -ln(1 - z)
    let mut v = 0.0;
    assert_eq!(unsafe { fc_hyp2f1(1.0, 1.0, 2.0, 0.5, &mut v) }, FcStatus::Ok);
    assert!((0.5 * v - 2f64.ln()).abs() < 1e-13);
}

#[test]
fn hyp2f1_negative_argument_is_a_domain_error() {
    let mut v = 0.0;
    assert_eq!(unsafe { fc_hyp2f1(1.0, 1.0, 2.0, -0.5, &mut v) }, FcStatus::Domain);
}

#[test]
fn null_out_pointer() {
    assert_eq!(unsafe { fc_gamma(1.0, ptr::null_mut()) }, FcStatus::NullPointer);
    assert_eq!(unsafe { fc_scenario_parse(ptr::null(), ptr::null_mut()) }, FcStatus::NullPointer);
}

#[test]
fn bad_config_is_a_config_error() {
    assert_eq!(parse("alpha = = 1").unwrap_err(), FcStatus::Config);
    assert!(last_error().contains("line 1"), "{}", last_error());
}

#[test]
fn alpha_out_of_range_is_rejected() {
    let err = parse(&LINEAR.replace("alpha = 0.5", "alpha = 2.5")).unwrap_err();
    assert_ne!(err, FcStatus::Ok);
    assert!(last_error().contains("alpha"), "{}", last_error());
}

#[test]
fn solve_and_read_field() {
    let sc = parse(LINEAR).unwrap();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { fc_scenario_solve(sc, 16, &mut f) }, FcStatus::Ok);
    let (mut nt, mut nx) = (0, 0);
    assert_eq!(unsafe { fc_field_dims(f, &mut nt, &mut nx) }, FcStatus::Ok);
    assert_eq!(nt, 17);
    let mut vals = vec![0.0; nt * nx];
    assert_eq!(unsafe { fc_field_values(f, vals.as_mut_ptr(), vals.len() - 1) }, FcStatus::OutOfRange);
    assert_eq!(unsafe { fc_field_values(f, vals.as_mut_ptr(), vals.len()) }, FcStatus::Ok);
    // u(0, x) = sin x, peak at the middle node
    assert!((vals[nx / 2] - 1.0).abs() < 1e-12);
    unsafe {
        fc_field_free(f);
        fc_scenario_free(sc);
    }
}

#[test]
fn verify_report_rows_and_csv() {
    let sc = parse(LINEAR).unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { fc_scenario_verify(sc, &mut r) }, FcStatus::Ok);
    let n = unsafe { fc_report_len(r) };
    assert_eq!(n, 12);
    assert_eq!(unsafe { fc_report_failures(r) }, 0);

    let mut row = FcReportRow {
        n_steps: 0,
        n_x: 0,
        linf: 0.0,
        l2: 0.0,
        excluded_nodes: 0,
        convergence_ratio: 0.0,
    };
    assert_eq!(unsafe { fc_report_row(r, 0, &mut row) }, FcStatus::Ok);
    assert_eq!(row.n_steps, 32);
    assert!(row.convergence_ratio.is_nan());
    assert_eq!(unsafe { fc_report_row(r, n - 1, &mut row) }, FcStatus::Ok);
    assert!(row.convergence_ratio > 1.3);
    assert_eq!(unsafe { fc_report_row(r, n, &mut row) }, FcStatus::OutOfRange);

    let mut id = [0 as c_char; 64];
    let len = unsafe { fc_report_id(r, 0, id.as_mut_ptr(), id.len()) };
    let id: Vec<u8> = id[..len].iter().map(|&c| c as u8).collect();
    assert_eq!(std::str::from_utf8(&id).unwrap(), "Table3_v1");

    let need = unsafe { fc_report_csv(r, ptr::null_mut(), 0) };
    let mut small = [1 as c_char; 8];
    assert_eq!(unsafe { fc_report_csv(r, small.as_mut_ptr(), small.len()) }, need);
    assert_eq!(small[7], 0);
    let mut buf = vec![0u8; need + 1];
    unsafe { fc_report_csv(r, buf.as_mut_ptr().cast(), buf.len()) };
    let csv = std::str::from_utf8(&buf[..need]).unwrap();
    assert!(csv.starts_with("provenance_id,"));
    assert_eq!(csv.lines().count(), n + 1);

    unsafe {
        fc_report_free(r);
        fc_scenario_free(sc);
    }
}

#[test]
fn free_accepts_null() {
    unsafe {
        fc_scenario_free(ptr::null_mut());
        fc_field_free(ptr::null_mut());
        fc_report_free(ptr::null_mut());
    }
    assert_eq!(unsafe { fc_report_len(ptr::null()) }, 0);
}

#[test]
fn selftest_unknown_criterion_fails() {
    let mut passed = 7;
    assert_ne!(unsafe { fc_selftest(99, &mut passed) }, FcStatus::Ok);
    assert_eq!(passed, 7);
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { std::ffi::CStr::from_ptr(fc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_entry_point() {
    let h = include_str!("../include/fraccons.h");
    for name in [
        "fc_last_error",
        "fc_gamma",
        "fc_scenario_parse",
        "fc_scenario_verify",
        "fc_report_csv",
        "fc_field_values",
        "FC_STATUS_PANIC",
    ] {
        assert!(h.contains(name), "{name} missing from header");
    }
}

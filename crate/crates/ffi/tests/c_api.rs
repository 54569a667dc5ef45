use std::ffi::{c_char, CString};
use std::process::Command;
use std::ptr;

use dampwave_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { dw_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(256) - 1].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn exponents_through_the_c_api() {
    let mut p = 0.0;
    assert_eq!(unsafe { dw_critical_exponent(DwSettingKind::Euclidean, 1, 0.25, &mut p) }, DwStatus::Ok);
    assert!((p - 11.0 / 3.0).abs() < 1e-14);
    let mut g = 0.0;
    assert_eq!(unsafe { dw_gamma_tilde(DwSettingKind::Euclidean, 4, &mut g) }, DwStatus::Ok);
    assert!((g - (5f64.sqrt() - 1.0)).abs() < 1e-12);
    let mut ok = -1;
    assert_eq!(unsafe { dw_check_admissibility(DwSettingKind::Heisenberg, 2, 0.9, &mut ok) }, DwStatus::Ok);
    assert_eq!(ok, 0);
    assert!(last_error().contains("gamma >= 1"));
    assert_eq!(unsafe { dw_check_admissibility(DwSettingKind::Euclidean, 7, 0.5, &mut ok) }, DwStatus::OutOfScope);
}

#[test]
fn errors_are_reported() {
    assert_eq!(unsafe { dw_critical_exponent(DwSettingKind::Euclidean, 1, 0.25, ptr::null_mut()) }, DwStatus::NullPointer);
    let mut p = 0.0;
    assert_eq!(unsafe { dw_critical_exponent(DwSettingKind::Euclidean, 1, -1.0, &mut p) }, DwStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    let mut e = DwPropagator::default();
    assert_eq!(unsafe { dw_propagator(-1.0, 1.0, &mut e) }, DwStatus::InvalidArgument);
    let needed = unsafe { dw_last_error_message(ptr::null_mut(), 0) };
    assert!(needed > 1);
}

#[test]
fn propagator_at_double_root() {
    let mut e = DwPropagator::default();
    assert_eq!(unsafe { dw_propagator(2.0, 0.25, &mut e) }, DwStatus::Ok);
    assert!((e.b - 2.0 * (-1f64).exp()).abs() < 1e-14);
    assert!((e.a - 2.0 * (-1f64).exp()).abs() < 1e-14);
}

#[test]
fn decay_fit_through_the_c_api() {
    let t: Vec<f64> = (0..40).map(|i| 1.2f64.powi(i)).collect();
    let y: Vec<f64> = t.iter().map(|t| 2.0 * (1.0 + t).powf(-0.75)).collect();
    let mut fit = DwDecayFit::default();
    let s = unsafe { dw_fit_decay(t.as_ptr(), y.as_ptr(), t.len(), 1.0, 1e3, &mut fit) };
    assert_eq!(s, DwStatus::Ok);
    assert!((fit.slope + 0.75).abs() < 1e-12);
    assert!(fit.n_points >= 8);
}

const SETUP: &str = r#"{
  "problem": {"dimension": 1, "gamma": 0.25, "nonlinearity": "zero"},
  "grid": {"dim": 1, "points": 256, "half_width": 64.0},
  "data": {"profile": {"kind": "gaussian_bump", "width": 1.0}, "placement": "displacement"},
  "horizon": 20.0
}"#;

#[test]
fn trajectory_handle_life_cycle() {
    let json = CString::new(SETUP).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { dw_trajectory_simulate(json.as_ptr(), &mut h) }, DwStatus::Ok, "{}", last_error());
    assert!(!h.is_null());
    let n = unsafe { dw_trajectory_len(h) };
    assert!(n > 10);
    let mut first = DwSample::default();
    let mut last = DwSample::default();
    assert_eq!(unsafe { dw_trajectory_sample(h, 0, &mut first) }, DwStatus::Ok);
    assert_eq!(unsafe { dw_trajectory_sample(h, n - 1, &mut last) }, DwStatus::Ok);
    assert_eq!(first.t, 0.0);
    assert_eq!(last.t, 20.0);
    assert!(last.l2 < first.l2);
    assert_eq!(unsafe { dw_trajectory_sample(h, n, &mut last) }, DwStatus::InvalidArgument);
    let mut st = DwRunStatus::default();
    assert_eq!(unsafe { dw_trajectory_status(h, &mut st) }, DwStatus::Ok);
    assert_eq!((st.blow_up, st.time), (0, 20.0));
    unsafe { dw_trajectory_free(h) };
    unsafe { dw_trajectory_free(ptr::null_mut()) };
    assert_eq!(unsafe { dw_trajectory_len(ptr::null()) }, 0);
}

#[test]
fn bad_setups_are_rejected() {
    let mut h = ptr::null_mut();
    let bad = CString::new("{not json").unwrap();
    assert_eq!(unsafe { dw_trajectory_simulate(bad.as_ptr(), &mut h) }, DwStatus::InvalidArgument);
    assert!(h.is_null());
    let inadmissible = CString::new(SETUP.replace("0.25", "0.75")).unwrap();
    assert_eq!(unsafe { dw_trajectory_simulate(inadmissible.as_ptr(), &mut h) }, DwStatus::Refused);
    assert!(last_error().contains("not admissible"));
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/dampwave.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in ["dw_critical_exponent", "dw_trajectory_simulate", "dw_trajectory_free", "DwStatus", "DW_STATUS_OK"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(&src, "#include \"dampwave.h\"\nint main(void) { DwTrajectory *h = 0; dw_trajectory_free(h); return DW_STATUS_OK; }\n").unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    match Command::new(&cc).arg("-fsyntax-only").arg("-I").arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include")).arg(&src).status() {
        Ok(s) => assert!(s.success(), "header does not compile as C"),
        Err(e) => eprintln!("skipping C compile check, no compiler: {e}"),
    }
}

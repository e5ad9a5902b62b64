use std::ffi::{CStr, CString};
use std::ptr;

use perfbie_ffi::*;

fn last_error() -> String {
    let p = perfbie_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn default_problem(nodes: usize) -> *mut PerfbieProblem {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { perfbie_problem_default(nodes, &mut p) }, PerfbieStatus::Ok);
    assert!(!p.is_null());
    p
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(perfbie_version()) };
    assert_eq!(v.to_str().unwrap(), perfbie::VERSION);
}

#[test]
fn solve_and_evaluate() {
    let p = default_problem(64);
    assert_eq!(unsafe { perfbie_problem_nodes(p) }, 64);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { perfbie_solve(p, 0.1, 0.1, &mut s) }, PerfbieStatus::Ok);
    let mut v = f64::NAN;
    assert_eq!(unsafe { perfbie_solution_eval(s, 0.3, 0.1, &mut v) }, PerfbieStatus::Ok);
    assert!(v.is_finite());
    let mut defect = f64::NAN;
    assert_eq!(unsafe { perfbie_solution_flux_defect(s, 1, &mut defect) }, PerfbieStatus::Ok);
    assert!(defect.abs() < 1e-10);
    let mut cond = 0.0;
    assert_eq!(unsafe { perfbie_solution_condition(s, &mut cond) }, PerfbieStatus::Ok);
    assert!(cond >= 1.0);
    let mut buf = vec![0.0; 3 * 64 + 1];
    assert_eq!(
        unsafe { perfbie_solution_densities(s, buf.as_mut_ptr(), buf.len()) },
        PerfbieStatus::Ok
    );
    assert!(buf.iter().any(|x| *x != 0.0));
    assert_eq!(
        unsafe { perfbie_solution_densities(s, buf.as_mut_ptr(), 10) },
        PerfbieStatus::InvalidArgument
    );
    unsafe {
        perfbie_solution_free(s);
        perfbie_problem_free(p);
    }
}

#[test]
fn errors_set_status_and_message() {
    let p = default_problem(0);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { perfbie_solve(p, 0.9, 0.9, &mut s) }, PerfbieStatus::Geometry);
    assert!(s.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { perfbie_solve(p, 0.1, 0.1, &mut s) }, PerfbieStatus::Ok);
    let mut v = 0.0;
    assert_eq!(
        unsafe { perfbie_solution_eval(s, 2.0, 0.0, &mut v) },
        PerfbieStatus::TargetRejected
    );
    assert_eq!(
        unsafe { perfbie_solution_flux_defect(s, 3, &mut v) },
        PerfbieStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { perfbie_solution_eval(ptr::null(), 0.0, 0.0, &mut v) },
        PerfbieStatus::NullPointer
    );
    assert!(last_error().contains("solution"));
    unsafe {
        perfbie_solution_free(s);
        perfbie_problem_free(p);
        perfbie_problem_free(ptr::null_mut());
    }
}

#[test]
fn json_configuration() {
    let bad = CString::new("{\"outer\": 3}").unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { perfbie_problem_from_json(bad.as_ptr(), &mut p) }, PerfbieStatus::InvalidConfig);
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.json");
    let text = CString::new(std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(unsafe { perfbie_problem_from_json(text.as_ptr(), &mut p) }, PerfbieStatus::Ok);
    assert_eq!(unsafe { perfbie_problem_nodes(p) }, 128);
    unsafe { perfbie_problem_free(p) };
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/perfbie.h");
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let status = std::process::Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, header])
            .status()
            .unwrap_or_else(|e| panic!("{compiler}: {e}"));
        assert!(status.success(), "{compiler} rejected the header");
    }
}

use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use extent_cbf_ffi::*;

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios").join(format!("{name}.toml"))
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    unsafe {
        ecbf_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn load(name: &str) -> *mut EcbfScenario {
    let path = CString::new(scenario_path(name).to_str().unwrap()).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { ecbf_scenario_load(path.as_ptr(), &mut s) }, EcbfStatus::Ok, "{}", last_error());
    s
}

#[test]
fn qp_round_trip_and_errors() {
    unsafe {
        let mut q = ptr::null_mut();
        let k = [2.0, 0.0];
        assert_eq!(ecbf_qp_new(k.as_ptr(), 2, 1.0, &mut q), EcbfStatus::Ok);
        let mut u = [0.0; 2];
        let mut obj = 0.0;
        assert_eq!(ecbf_qp_solve(q, EcbfQpMethod::ActiveSet, 0.0, 0, u.as_mut_ptr(), 2, &mut obj), EcbfStatus::Ok);
        assert!((u[0] - 1.0).abs() < 1e-12 && (obj - 1.0).abs() < 1e-12);
        // a row the ball cannot meet
        assert_eq!(ecbf_qp_add_row(q, [1.0, 0.0].as_ptr(), 2, 3.0), EcbfStatus::Ok);
        for method in [EcbfQpMethod::Auto, EcbfQpMethod::Dykstra, EcbfQpMethod::ActiveSet] {
            assert_eq!(ecbf_qp_solve(q, method, 1e-10, 0, u.as_mut_ptr(), 2, ptr::null_mut()), EcbfStatus::Infeasible);
        }
        assert!(last_error().contains("no input"));
        assert_eq!(ecbf_qp_solve(q, EcbfQpMethod::Auto, 0.0, 0, ptr::null_mut(), 2, ptr::null_mut()), EcbfStatus::NullPointer);
        assert_eq!(ecbf_qp_new(k.as_ptr(), 2, -1.0, &mut ptr::null_mut()), EcbfStatus::InvalidArgument);
        ecbf_qp_free(q);
        ecbf_qp_free(ptr::null_mut());
    }
}

#[test]
fn scenario_errors_map_to_codes() {
    let mut s = ptr::null_mut();
    unsafe {
        let bad = CString::new("name = \"x\"\nbogus = 1\n").unwrap();
        assert_eq!(ecbf_scenario_from_toml(bad.as_ptr(), &mut s), EcbfStatus::Parse);
        let text = std::fs::read_to_string(scenario_path("cs1_sos")).unwrap().replace("dt = 0.01", "dt = 0.0");
        let invalid = CString::new(text).unwrap();
        assert_eq!(ecbf_scenario_from_toml(invalid.as_ptr(), &mut s), EcbfStatus::Config);
        assert!(last_error().contains("dt must be positive"));
        assert_eq!(ecbf_scenario_from_toml(ptr::null(), &mut s), EcbfStatus::NullPointer);
        assert!(s.is_null());
    }
}

#[test]
fn filter_step_and_run_through_the_abi() {
    let s = load("cs2_sampled200");
    unsafe {
        let (mut n, mut m) = (0, 0);
        assert_eq!(ecbf_scenario_dimensions(s, &mut n, &mut m), EcbfStatus::Ok);
        assert_eq!((n, m), (3, 2));
        let mut x = [0.0; 3];
        assert_eq!(ecbf_scenario_initial_state(s, x.as_mut_ptr(), 3), EcbfStatus::Ok);
        let mut k = [0.0; 2];
        assert_eq!(ecbf_scenario_nominal(s, x.as_ptr(), 3, k.as_mut_ptr(), 2), EcbfStatus::Ok);
        let mut u = [0.0; 2];
        let mut info = EcbfFilterInfo::default();
        assert_eq!(ecbf_scenario_filter(s, x.as_ptr(), 3, k.as_ptr(), u.as_mut_ptr(), 2, &mut info), EcbfStatus::Ok);
        assert!(info.solve_ms >= 0.0);
        assert_eq!(
            ecbf_scenario_filter(s, x.as_ptr(), 2, k.as_ptr(), u.as_mut_ptr(), 2, ptr::null_mut()),
            EcbfStatus::DimensionMismatch
        );
        let mut next = [0.0; 3];
        assert_eq!(ecbf_scenario_step(s, x.as_ptr(), 3, u.as_ptr(), 2, 0.01, next.as_mut_ptr()), EcbfStatus::Ok);
        assert!(next != x);
        ecbf_scenario_free(s);
    }

    let text = std::fs::read_to_string(scenario_path("example1_4pt")).unwrap().replace("horizon = 20.0", "horizon = 0.5");
    let text = CString::new(text).unwrap();
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(ecbf_scenario_from_toml(text.as_ptr(), &mut s), EcbfStatus::Ok, "{}", last_error());
        let mut summary = EcbfRunSummary::default();
        assert_eq!(ecbf_scenario_run(s, &mut summary), EcbfStatus::Ok);
        assert_eq!(summary.steps, 50);
        assert_eq!(summary.halts, 0);
        assert!(summary.min_boundary_h > 0.0);
        ecbf_scenario_free(s);
    }
}

#[test]
fn truncated_error_message_is_terminated() {
    unsafe {
        let mut s = ptr::null_mut();
        let missing = CString::new("/nonexistent/x.toml").unwrap();
        assert_eq!(ecbf_scenario_load(missing.as_ptr(), &mut s), EcbfStatus::Io);
        let full = ecbf_last_error(ptr::null_mut(), 0);
        let mut buf = [1 as std::ffi::c_char; 8];
        assert_eq!(ecbf_last_error(buf.as_mut_ptr(), 8), full);
        assert_eq!(buf[7], 0);
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_bytes().len(), 7);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/extent_cbf.h")).unwrap();
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|l| l.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 12);
    for f in exports {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
}

#[test]
fn c_program_links_against_the_static_library() {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libextent_cbf_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.exists() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let status = Command::new(&cc)
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).arg(scenario_path("example1_4pt")).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok 0.1.0"));
}

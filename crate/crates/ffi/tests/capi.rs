use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use fsde_ffi::*;
use libc::{c_void, size_t};

fn last_error() -> String {
    let p = fsde_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn soe_round_trip() {
    unsafe {
        let mut soe = ptr::null_mut();
        assert_eq!(fsde_soe_build(0.5, 1e-9, 1e-3, 1.0, &mut soe), FsdeStatus::Ok);
        let n = fsde_soe_len(soe);
        assert!(n > 0);
        let mut w = vec![0.0; n];
        let mut s = vec![0.0; n];
        assert_eq!(
            fsde_soe_terms(soe, w.as_mut_ptr(), s.as_mut_ptr(), n - 1),
            FsdeStatus::BufferTooSmall
        );
        assert_eq!(fsde_soe_terms(soe, w.as_mut_ptr(), s.as_mut_ptr(), n), FsdeStatus::Ok);
        let t = 0.37;
        let direct: f64 = w.iter().zip(&s).map(|(w, s)| w * (-s * t).exp()).sum();
        let mut v = 0.0;
        assert_eq!(fsde_soe_eval(soe, t, &mut v), FsdeStatus::Ok);
        assert!((v - direct).abs() < 1e-12);
        assert!((v - t.powf(-0.5)).abs() <= 1e-9);
        assert_eq!(fsde_soe_eval(soe, 0.0, &mut v), FsdeStatus::InvalidArgument);
        let mut err = 1.0;
        assert_eq!(fsde_soe_validate(soe, 2000, &mut err), FsdeStatus::Ok);
        assert!(err <= 1e-9);
        fsde_soe_free(soe);
    }
}

#[test]
fn errors_and_nulls() {
    unsafe {
        let mut soe = ptr::null_mut();
        assert_eq!(fsde_soe_build(1.5, 1e-9, 1e-3, 1.0, &mut soe), FsdeStatus::InvalidArgument);
        assert!(!last_error().is_empty());
        assert_eq!(fsde_soe_build(0.5, 1e-9, 1e-3, 1.0, ptr::null_mut()), FsdeStatus::NullPointer);
        assert_eq!(fsde_soe_len(ptr::null()), 0);
        fsde_soe_free(ptr::null_mut());
        let id = CString::new("nope").unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(fsde_problem_from_catalog(id.as_ptr(), 0.0, &mut p), FsdeStatus::InvalidArgument);
        assert!(last_error().contains("nope"));
        assert_eq!(
            fsde_problem_from_callbacks(1, [0.0].as_ptr(), 1.0, None, None, ptr::null_mut(), &mut p),
            FsdeStatus::NullPointer
        );
        assert_eq!(fsde_trajectory_len(ptr::null()), 0);
        assert!(fsde_trajectory_values(ptr::null()).is_null());
    }
}

extern "C" fn blow_up(_t: f64, y: *const f64, out: *mut f64, dim: size_t, _u: *mut c_void) {
    unsafe {
        for i in 0..dim {
            *out.add(i) = *y.add(i) * *y.add(i) * 1e300;
        }
    }
}

extern "C" fn zero(_t: f64, _y: *const f64, out: *mut f64, dim: size_t, _u: *mut c_void) {
    unsafe {
        for i in 0..dim {
            *out.add(i) = 0.0;
        }
    }
}

extern "C" fn scaled(_t: f64, y: *const f64, out: *mut f64, dim: size_t, u: *mut c_void) {
    unsafe {
        let c = *(u as *const f64);
        for i in 0..dim {
            *out.add(i) = c * (*y.add(i)).sin();
        }
    }
}

#[test]
fn callback_problem_matches_catalog_and_reports_divergence() {
    unsafe {
        let n = 32;
        let mut dw = vec![0.0; n];
        assert_eq!(
            fsde_brownian_sample(fsde_path_seed(7, 3), 1.0, n, dw.as_mut_ptr(), n),
            FsdeStatus::Ok
        );
        let grid = fsde::TimeGrid::new(1.0, n).unwrap();
        let expected = fsde::sample_path(fsde::path_seed(7, 3), &grid);
        assert_eq!(dw.as_slice(), expected.increments());

        let id = CString::new("example1").unwrap();
        let mut reference = ptr::null_mut();
        assert_eq!(fsde_problem_from_catalog(id.as_ptr(), 0.0, &mut reference), FsdeStatus::Ok);
        let alphas = [0.3, 0.7];
        let mut t = ptr::null_mut();
        assert_eq!(
            fsde_solve(reference, alphas.as_ptr(), 2, FsdeMethod::Direct, 0.0, dw.as_ptr(), n, &mut t),
            FsdeStatus::Ok
        );
        let orders = fsde::FractionalOrders::new(&alphas).unwrap();
        let problem = fsde::catalog::lookup("example1")
            .unwrap()
            .build(&Default::default())
            .unwrap();
        let direct = fsde::solve_direct(&problem, &orders, &grid, &expected).unwrap();
        let values = std::slice::from_raw_parts(fsde_trajectory_values(t), fsde_trajectory_len(t));
        assert_eq!(values, direct.values());
        fsde_trajectory_free(t);
        fsde_problem_free(reference);

        let one = 1.0f64;
        let mut p = ptr::null_mut();
        assert_eq!(
            fsde_problem_from_callbacks(
                2,
                [0.2, 0.4].as_ptr(),
                1.0,
                Some(zero),
                Some(scaled),
                &one as *const f64 as *mut c_void,
                &mut p
            ),
            FsdeStatus::Ok
        );
        assert_eq!(fsde_problem_dim(p), 2);
        let mut t = ptr::null_mut();
        assert_eq!(
            fsde_solve(p, alphas.as_ptr(), 2, FsdeMethod::Fast, 1e-10, dw.as_ptr(), n, &mut t),
            FsdeStatus::Ok
        );
        assert_eq!(fsde_trajectory_dim(t), 2);
        assert_eq!(fsde_trajectory_len(t), n + 1);
        fsde_trajectory_free(t);
        fsde_problem_free(p);

        let mut p = ptr::null_mut();
        fsde_problem_from_callbacks(1, [1.0].as_ptr(), 1.0, Some(blow_up), Some(zero), ptr::null_mut(), &mut p);
        let mut t = ptr::null_mut();
        assert_eq!(
            fsde_solve(p, alphas.as_ptr(), 2, FsdeMethod::Direct, 0.0, dw.as_ptr(), n, &mut t),
            FsdeStatus::Numerical
        );
        assert!(last_error().contains("step"));
        fsde_problem_free(p);
    }
}

#[test]
fn study_json() {
    unsafe {
        let config = CString::new(
            r#"{"problem":"example1","orders":[0.1,0.2],"resolutions":[8,16],"path_count":20,
                "base_seed":3,"soe_epsilon":1e-10,"methods":["fast"],"horizon":1.0,
                "workers":1,"timing_repeats":0,"bench_paths":1}"#,
        )
        .unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(fsde_run_study_json(config.as_ptr(), &mut out), FsdeStatus::Ok);
        let json: serde_json::Value =
            serde_json::from_str(CStr::from_ptr(out).to_str().unwrap()).unwrap();
        fsde_string_free(out);
        assert_eq!(json["metadata"]["base_seed"], 3);
        assert_eq!(json["methods"][0]["errors"].as_array().unwrap().len(), 2);

        let bad = CString::new(r#"{"problem":"example1"}"#).unwrap();
        assert_eq!(fsde_run_study_json(bad.as_ptr(), &mut out), FsdeStatus::InvalidArgument);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(fsde_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn target_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_smoke_program() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libfsde_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.exists() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let build = Command::new(&cc)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(build.status.success(), "{}", String::from_utf8_lossy(&build.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(
        run.status.success(),
        "exit {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("y(T) = "));
}

use std::ffi::{c_char, CStr};
use std::path::Path;
use std::process::Command;
use std::ptr;

use valgrad_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    let n = unsafe { vg_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(vg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn toy_step_round_trip() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { vg_toy_new(2, 1.0, &mut p) }, VgStatus::Ok);
    let (mut x, mut r) = (0.0, 0.0);
    assert_eq!(unsafe { vg_toy_step(p, 0, 3.0, -1.0, &mut x, &mut r) }, VgStatus::Ok);
    assert_eq!(x, 2.0);
    assert_eq!(r, -1.0);
    unsafe { vg_toy_free(p) };
}

#[test]
fn bad_arguments_set_status_and_message() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { vg_toy_new(0, 1.0, &mut p) }, VgStatus::InvalidArgument);
    assert!(p.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { vg_toy_new(1, 1.0, ptr::null_mut()) }, VgStatus::NullPointer);
    assert!(last_error().contains("null"));

    let (mut x, mut r) = (0.0, 0.0);
    assert_eq!(unsafe { vg_toy_step(ptr::null(), 0, 0.0, 0.0, &mut x, &mut r) }, VgStatus::NullPointer);

    let (mut s, mut l) = (false, 0.0);
    assert_eq!(unsafe { vg_stability(7, true, 1.0, &mut s, &mut l) }, VgStatus::InvalidArgument);

    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { vg_config_new(9, &mut cfg) }, VgStatus::Config);
}

#[test]
fn error_message_truncates_safely() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { vg_lander_new(-1.0, &mut p) }, VgStatus::InvalidArgument);
    let mut buf = [1 as c_char; 4];
    let n = unsafe { vg_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 3);
    assert_eq!(buf[3], 0);
    assert!(unsafe { vg_last_error_message(ptr::null_mut(), 0) } == n);
}

#[test]
fn freeing_null_is_a_no_op() {
    unsafe {
        vg_toy_free(ptr::null_mut());
        vg_lander_free(ptr::null_mut());
        vg_mlp_free(ptr::null_mut());
        vg_config_free(ptr::null_mut());
    }
}

#[test]
fn critic_weights_and_eval() {
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { vg_mlp_lander_new(VgInputActivation::Sigmoid, 3, &mut c) }, VgStatus::Ok);
    let n = unsafe { vg_mlp_num_weights(c) };
    assert!(n > 0);
    let mut w = vec![0.0; n];
    assert_eq!(unsafe { vg_mlp_get_weights(c, w.as_mut_ptr(), n) }, VgStatus::Ok);
    assert!(w.iter().any(|v| *v != 0.0));
    assert_eq!(unsafe { vg_mlp_get_weights(c, w.as_mut_ptr(), n - 1) }, VgStatus::InvalidArgument);

    let zeros = vec![0.0; n];
    assert_eq!(unsafe { vg_mlp_set_weights(c, zeros.as_ptr(), n) }, VgStatus::Ok);
    let x = [5.0, -1.0, 3.0];
    let (mut v, mut g) = (1.0, [1.0; 3]);
    assert_eq!(unsafe { vg_mlp_eval(c, x.as_ptr(), &mut v, g.as_mut_ptr()) }, VgStatus::Ok);
    assert_eq!(v, 0.0);
    assert_eq!(g, [0.0; 3]);
    unsafe { vg_mlp_free(c) };
}

#[test]
fn lander_oracle_beats_a_random_critic() {
    let mut m = ptr::null_mut();
    let mut c = ptr::null_mut();
    unsafe {
        assert_eq!(vg_lander_new(0.01, &mut m), VgStatus::Ok);
        assert_eq!(vg_mlp_lander_new(VgInputActivation::Identity, 1, &mut c), VgStatus::Ok);
    }
    let (mut best, mut steps) = (0.0, 0);
    assert_eq!(unsafe { vg_lander_oracle(m, 100.0, 0.0, 50.0, 0.1, &mut best, &mut steps) }, VgStatus::Ok);
    assert!((best + 12.76697).abs() < 1e-3, "{best}");
    assert!(steps > 0);
    let x0 = [100.0, 0.0, 50.0];
    let mut r = 0.0;
    assert_eq!(unsafe { vg_lander_rollout(m, c, x0.as_ptr(), 0.1, &mut r) }, VgStatus::Ok);
    assert!(r <= best + 1e-9);
    unsafe {
        vg_mlp_free(c);
        vg_lander_free(m);
    }
}

#[test]
fn toy_experiment_through_config() {
    let mut cfg = ptr::null_mut();
    let mut row = VgTableRow::default();
    unsafe {
        assert_eq!(vg_config_new(1, &mut cfg), VgStatus::Ok);
        assert_eq!(vg_config_set_algorithm(cfg, VgAlgorithm::Vgl, 1.0), VgStatus::Ok);
        assert_eq!(vg_config_set_run(cfg, 1.0, 0.0, 20, 5), VgStatus::Ok);
        assert_eq!(vg_config_validate(cfg), VgStatus::Ok);
        assert_eq!(vg_run_toy(cfg, &mut row), VgStatus::Ok);
    }
    assert_eq!(row.trials, 20);
    assert_eq!(row.successes, 20);
    assert_eq!(row.iterations_mean, 1.0);

    unsafe {
        assert_eq!(vg_config_set_run(cfg, -1.0, 0.0, 20, 5), VgStatus::Ok);
        assert_eq!(vg_config_validate(cfg), VgStatus::Config);
        vg_config_free(cfg);
        assert_eq!(vg_config_new(5, &mut cfg), VgStatus::Ok);
        assert_eq!(vg_run_toy(cfg, &mut row), VgStatus::Config);
        vg_config_free(cfg);
    }
}

#[test]
fn gradcheck_and_stability() {
    let (mut pass, mut err) = (false, f64::NAN);
    assert_eq!(unsafe { vg_gradcheck(2, 5, &mut pass, &mut err) }, VgStatus::Ok);
    assert!(pass && err < 1e-4);

    let (mut s, mut l) = (false, 0.0);
    unsafe {
        assert_eq!(vg_stability(0, true, 1.0, &mut s, &mut l), VgStatus::Ok);
        assert!(s && l < 0.0);
        assert_eq!(vg_stability(0, true, 0.0, &mut s, &mut l), VgStatus::Ok);
        assert!(!s && l > 0.0);
        assert_eq!(vg_stability(1, false, 1.0, &mut s, &mut l), VgStatus::Ok);
        assert!(!s);
    }
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/valgrad.h");
    let text = std::fs::read_to_string(&header).expect("header is generated by the build script");
    for name in ["vg_toy_new", "vg_last_error_message", "VG_STATUS_OK", "typedef struct VgMlpCritic VgMlpCritic"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(out) = Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"]).arg(&header).output()
    else {
        eprintln!("no C compiler; skipping syntax check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use oscint_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    unsafe {
        oscint_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn new(system: u32, integrator: u32, eps: f64, h: f64) -> *mut OscintIntegrator {
    let mut it = ptr::null_mut();
    let st = unsafe { oscint_integrator_new(system, integrator, eps, h, &mut it) };
    assert_eq!(st, OscintStatus::Ok, "{}", last_error());
    it
}

#[test]
fn lifecycle_fpu() {
    let it = new(OSCINT_SYSTEM_FPU, OSCINT_INTEGRATOR_HJ, 1e-3, 5e-3);
    unsafe {
        let mut dim = 0usize;
        assert_eq!(oscint_integrator_dim(it, &mut dim), OscintStatus::Ok);
        assert_eq!(dim, 12);
        let mut z = vec![0.0; dim];
        assert_eq!(oscint_integrator_get_state(it, z.as_mut_ptr(), dim), OscintStatus::Ok);

        let mut n_obs = 0usize;
        assert_eq!(oscint_integrator_observable_count(it, &mut n_obs), OscintStatus::Ok);
        let mut obs = vec![0.0; n_obs];
        assert_eq!(oscint_integrator_observables(it, obs.as_mut_ptr(), n_obs), OscintStatus::Ok);
        assert!((obs[0] - 2.500003).abs() < 1e-9);

        assert_eq!(oscint_integrator_step(it, 100), OscintStatus::Ok);
        let (mut t, mut calls) = (0.0, 0u64);
        assert_eq!(oscint_integrator_time(it, &mut t), OscintStatus::Ok);
        assert_eq!(oscint_integrator_slow_gradient_calls(it, &mut calls), OscintStatus::Ok);
        assert!((t - 0.5).abs() < 1e-12);
        assert!(calls >= 100 * 9);

        assert_eq!(oscint_integrator_set_state(it, z.as_ptr(), dim), OscintStatus::Ok);
        let mut back = vec![0.0; dim];
        oscint_integrator_get_state(it, back.as_mut_ptr(), dim);
        for (a, b) in z.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13 * a.abs().max(1.0));
        }
        oscint_integrator_free(it);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut it = ptr::null_mut();
        assert_eq!(oscint_integrator_new(99, 0, 1e-3, 1e-3, &mut it), OscintStatus::InvalidArgument);
        assert!(last_error().contains("unknown system"));
        assert_eq!(
            oscint_integrator_new(OSCINT_SYSTEM_FPU, OSCINT_INTEGRATOR_HJ_SYMMETRIC, 1e-3, 1e-3, &mut it),
            OscintStatus::InvalidArgument
        );
        assert_eq!(
            oscint_integrator_new(OSCINT_SYSTEM_FPU, OSCINT_INTEGRATOR_HJ, -1.0, 1e-3, &mut it),
            OscintStatus::InvalidArgument
        );
        assert!(it.is_null());
        assert_eq!(oscint_integrator_new(0, 0, 1e-3, 1e-3, ptr::null_mut()), OscintStatus::NullPointer);
        assert_eq!(oscint_integrator_step(ptr::null_mut(), 1), OscintStatus::NullPointer);
        oscint_integrator_free(ptr::null_mut());

        let it = new(OSCINT_SYSTEM_PENDULUM, OSCINT_INTEGRATOR_HJ_SYMMETRIC, 2e-3, 0.02);
        let mut small = [0.0; 2];
        assert_eq!(oscint_integrator_get_state(it, small.as_mut_ptr(), 2), OscintStatus::BufferTooSmall);
        let collapsed = [0.0, -0.95, 0.0, 0.0];
        assert_eq!(oscint_integrator_set_state(it, collapsed.as_ptr(), 4), OscintStatus::Domain);
        let nan = [f64::NAN, 0.0, 0.0, 0.0];
        assert_eq!(oscint_integrator_set_state(it, nan.as_ptr(), 4), OscintStatus::NonFinite);
        oscint_integrator_free(it);
    }
}

#[test]
fn error_message_reports_full_length() {
    unsafe {
        let mut it = ptr::null_mut();
        oscint_integrator_new(7, 0, 1e-3, 1e-3, &mut it);
        let full = oscint_last_error_message(ptr::null_mut(), 0);
        let mut tiny = [0 as std::ffi::c_char; 4];
        assert_eq!(oscint_last_error_message(tiny.as_mut_ptr(), 4), full);
        assert_eq!(CStr::from_ptr(tiny.as_ptr()).to_bytes().len(), 3);
    }
}

#[test]
fn baseline_handle_counts_calls() {
    let it = new(OSCINT_SYSTEM_FPU, OSCINT_INTEGRATOR_VERLET, 1e-2, 1e-3);
    unsafe {
        oscint_integrator_step(it, 10);
        oscint_integrator_step(it, 15);
        let mut calls = 0u64;
        oscint_integrator_slow_gradient_calls(it, &mut calls);
        assert_eq!(calls, 26);
        oscint_integrator_free(it);
    }
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/oscint.h");
    assert!(header.exists(), "build script did not write the header");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["oscint_integrator_new", "oscint_integrator_step", "oscint_last_error_message", "OSCINT_STATUS_OK"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&header).output() else {
        eprintln!("no C compiler found; skipping syntax check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

use std::ffi::{CStr, CString};
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use robustpulse_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(rp_last_error_message()) }.to_string_lossy().into_owned()
}

fn builtin(family: u32, theta: f64, phase: f64) -> *mut RpPulse {
    let mut p = ptr::null_mut();
    let status = unsafe { rp_pulse_builtin(family, theta, phase, RP_PLACEMENT_SPLIT, 1, rp_default_rabi(), &mut p) };
    assert_eq!(status, RpStatus::Ok, "{}", last_error());
    p
}

#[test]
fn corpse_duration_and_inversion() {
    let p = builtin(RP_FAMILY_CORPSE, PI, 0.0);
    unsafe {
        assert_eq!(rp_pulse_len(p), 3);
        assert!((rp_pulse_duration(p) - 216.666_666_666_666_7).abs() < 1e-9);
        let mut p1 = 0.0;
        let mut bloch = [0.0; 3];
        assert_eq!(rp_propagate(p, 0.0, 0.0, RP_G_AMPLITUDE, 1.0, &mut p1, bloch.as_mut_ptr()), RpStatus::Ok);
        assert!((p1 - 1.0).abs() < 1e-12);
        assert!((bloch[2] + 1.0).abs() < 1e-12);
        rp_pulse_free(p);
    }
}

#[test]
fn detuned_rabi_value() {
    let p = builtin(RP_FAMILY_RECT, PI, 0.0);
    let mut fid = 0.0;
    unsafe {
        assert_eq!(rp_state_fidelity(p, PI, 0.0, 1.0, 0.0, RP_G_AMPLITUDE, &mut fid), RpStatus::Ok);
        rp_pulse_free(p);
    }
    assert!((fid - 0.316_563_835_510_353_9).abs() < 1e-12);
}

#[test]
fn bloch_angles_of_half_pulse() {
    let p = builtin(RP_FAMILY_RECT, FRAC_PI_2, 0.0);
    let (mut theta, mut phi) = (0.0, 0.0);
    unsafe {
        assert_eq!(rp_bloch_angles(p, 0.0, 0.0, RP_G_AMPLITUDE, &mut theta, &mut phi), RpStatus::Ok);
        rp_pulse_free(p);
    }
    assert!((theta - FRAC_PI_2).abs() < 1e-12);
    assert!((phi + FRAC_PI_2).abs() < 1e-12);
}

#[test]
fn invalid_inputs_report_codes_and_messages() {
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(rp_pulse_builtin(99, PI, 0.0, 0, 1, rp_default_rabi(), &mut p), RpStatus::InvalidInput);
        assert!(p.is_null());
        assert!(last_error().contains("family"));
        assert_eq!(
            rp_pulse_builtin(RP_FAMILY_CORPSE, FRAC_PI_2, 0.0, 0, 1, rp_default_rabi(), &mut p),
            RpStatus::InvalidTheta
        );
        assert_eq!(
            rp_pulse_builtin(RP_FAMILY_BB1, 13.0, 0.0, RP_PLACEMENT_SPLIT, 1, rp_default_rabi(), &mut p),
            RpStatus::InvalidTheta
        );
        assert_eq!(
            rp_pulse_builtin(RP_FAMILY_RECT, PI, 0.0, 0, 0, rp_default_rabi(), &mut p),
            RpStatus::InvalidInput
        );
        assert_eq!(
            rp_pulse_builtin(RP_FAMILY_RECT, PI, 0.0, 0, 1, rp_default_rabi(), ptr::null_mut()),
            RpStatus::NullPointer
        );
        let mut v = 0.0;
        assert_eq!(rp_state_fidelity(ptr::null(), PI, 0.0, 0.0, 0.0, 0, &mut v), RpStatus::NullPointer);
        assert!(last_error().contains("pulse"));
        assert_eq!(rp_pulse_len(ptr::null()), 0);
        assert!(rp_pulse_duration(ptr::null()).is_nan());
        rp_pulse_free(ptr::null_mut());
        rp_grid_free(ptr::null_mut());
        rp_string_free(ptr::null_mut());
    }
    let p = builtin(RP_FAMILY_RECT, PI, 0.0);
    let mut v = 0.0;
    unsafe {
        assert_eq!(rp_state_fidelity(p, PI, 0.0, 0.0, 0.0, 7, &mut v), RpStatus::InvalidInput);
        assert_eq!(rp_state_fidelity(p, PI, 0.0, 0.0, 0.0, RP_G_AMPLITUDE, &mut v), RpStatus::Ok);
        rp_pulse_free(p);
    }
    assert_eq!(last_error(), "");
}

#[test]
fn pulse_text_round_trip() {
    let p = builtin(RP_FAMILY_BB1, FRAC_PI_2, 0.3);
    let comment = CString::new("bb1 test").unwrap();
    let mut text = ptr::null_mut();
    unsafe {
        assert_eq!(rp_pulse_to_text(p, comment.as_ptr(), &mut text), RpStatus::Ok);
        let mut q = ptr::null_mut();
        assert_eq!(rp_pulse_parse(text, &mut q), RpStatus::Ok);
        rp_string_free(text);

        let n = rp_pulse_len(p);
        assert_eq!(rp_pulse_len(q), n);
        let (mut a1, mut p1, mut d1) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let (mut a2, mut p2, mut d2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        assert_eq!(rp_pulse_steps(p, a1.as_mut_ptr(), p1.as_mut_ptr(), d1.as_mut_ptr(), n), RpStatus::Ok);
        assert_eq!(rp_pulse_steps(q, a2.as_mut_ptr(), p2.as_mut_ptr(), d2.as_mut_ptr(), n), RpStatus::Ok);
        for k in 0..n {
            assert_eq!(a1[k], a2[k]);
            assert!((p1[k] - p2[k]).sin().abs() < 1e-14);
            assert!((d1[k] - d2[k]).abs() < 1e-12);
        }
        assert_eq!(
            rp_pulse_steps(p, a1.as_mut_ptr(), p1.as_mut_ptr(), d1.as_mut_ptr(), n - 1),
            RpStatus::BufferTooSmall
        );
        rp_pulse_free(p);
        rp_pulse_free(q);

        let bad = CString::new("rabi_nominal_rad_per_us = 0.06\n1.0 oops 0\n").unwrap();
        let mut r = ptr::null_mut();
        assert_eq!(rp_pulse_parse(bad.as_ptr(), &mut r), RpStatus::Parse);
        assert!(r.is_null());
        assert!(last_error().contains("line 2"), "{}", last_error());
    }
}

#[test]
fn steps_constructor_matches_builtin() {
    let rabi = rp_default_rabi();
    let amps = [1.0, 0.5];
    let phases = [0.0, 0.0];
    let durs = [PI / 2.0 / rabi, PI / rabi];
    let mut p = ptr::null_mut();
    let mut fid = 0.0;
    unsafe {
        assert_eq!(
            rp_pulse_from_steps(amps.as_ptr(), phases.as_ptr(), durs.as_ptr(), 2, rabi, &mut p),
            RpStatus::Ok
        );
        assert_eq!(rp_state_fidelity(p, PI, 0.0, 0.0, 0.0, RP_G_AMPLITUDE, &mut fid), RpStatus::Ok);
        rp_pulse_free(p);
        let neg = [-1.0];
        assert_eq!(
            rp_pulse_from_steps(neg.as_ptr(), phases.as_ptr(), durs.as_ptr(), 1, rabi, &mut p),
            RpStatus::InvalidInput
        );
        assert_eq!(rp_pulse_from_steps(ptr::null(), ptr::null(), ptr::null(), 0, rabi, &mut p), RpStatus::InvalidInput);
    }
    assert!((fid - 1.0).abs() < 1e-12);
}

#[test]
fn grid_sweep_mask_and_interpolation() {
    let p = builtin(RP_FAMILY_RECT, PI, 0.0);
    let f = [-1.0, 0.0, 1.0];
    let g = [-0.2, 0.0, 0.2];
    let mut grid = ptr::null_mut();
    unsafe {
        assert_eq!(
            rp_grid_sweep(p, PI, 0.0, 1.0, f.as_ptr(), 3, g.as_ptr(), 3, RP_G_AMPLITUDE, &mut grid),
            RpStatus::Ok
        );
        let (mut nf, mut ng) = (0, 0);
        assert_eq!(rp_grid_shape(grid, &mut nf, &mut ng), RpStatus::Ok);
        assert_eq!((nf, ng), (3, 3));
        let mut values = [0.0; 9];
        assert_eq!(rp_grid_values(grid, values.as_mut_ptr(), 9), RpStatus::Ok);
        assert_eq!(rp_grid_values(grid, values.as_mut_ptr(), 8), RpStatus::BufferTooSmall);
        assert!((values[4] - 1.0).abs() < 1e-14);
        assert!((values[7] - 0.316_563_835_510_353_9).abs() < 1e-12);
        assert_eq!(values[0], values[6]);
        assert!((rp_grid_reference(grid) - 1.0).abs() < 1e-14);

        let mut mask = [9u8; 9];
        assert_eq!(rp_grid_mask(grid, 0.96, mask.as_mut_ptr(), 9), RpStatus::Ok);
        assert_eq!(mask, [0, 0, 0, 0, 1, 0, 0, 0, 0]);

        let mut v = 0.0;
        assert_eq!(rp_grid_interpolate(grid, 0.0, 0.0, &mut v), RpStatus::Ok);
        assert!((v - 1.0).abs() < 1e-14);
        assert_eq!(rp_grid_interpolate(grid, 0.5, 0.0, &mut v), RpStatus::Ok);
        assert!((v - 0.5 * (values[4] + values[7])).abs() < 1e-14);
        assert_eq!(rp_grid_interpolate(grid, 1.5, 0.0, &mut v), RpStatus::OutOfBounds);
        rp_grid_free(grid);

        let unsorted = [0.0, -1.0];
        assert_eq!(
            rp_grid_sweep(p, PI, 0.0, 1.0, unsorted.as_ptr(), 2, g.as_ptr(), 3, RP_G_AMPLITUDE, &mut grid),
            RpStatus::InvalidInput
        );
        assert!(grid.is_null());
        rp_pulse_free(p);
    }
}

#[test]
fn design_small_problem() {
    let mut params = std::mem::MaybeUninit::<RpDesignParams>::uninit();
    let mut params = unsafe {
        assert_eq!(rp_design_params_default(params.as_mut_ptr()), RpStatus::Ok);
        params.assume_init()
    };
    assert_eq!(params.n_steps, 200);
    params.n_steps = 20;
    params.step_duration = 10.0;
    params.f_samples = 3;
    params.g_samples = 3;
    params.f_min = -0.3;
    params.f_max = 0.3;
    params.max_iterations = 300;
    params.seed = 4;
    let mut pulse = ptr::null_mut();
    let mut cost = 0.0;
    let mut outcome = 99;
    unsafe {
        assert_eq!(rp_design(&params, &mut pulse, &mut cost, &mut outcome), RpStatus::Ok);
        assert_eq!(rp_pulse_len(pulse), 20);
        assert!(outcome <= RP_OUTCOME_NO_IMPROVEMENT);
        assert!(cost > 0.99, "cost {cost}");
        let mut again = ptr::null_mut();
        let mut cost2 = 0.0;
        assert_eq!(rp_design(&params, &mut again, &mut cost2, ptr::null_mut()), RpStatus::Ok);
        assert_eq!(cost.to_bits(), cost2.to_bits());
        rp_pulse_free(again);
        rp_pulse_free(pulse);

        params.n_steps = 0;
        assert_eq!(rp_design(&params, &mut pulse, ptr::null_mut(), ptr::null_mut()), RpStatus::InvalidInput);
        params.n_steps = 5;
        params.init = 42;
        assert_eq!(rp_design(&params, &mut pulse, ptr::null_mut(), ptr::null_mut()), RpStatus::InvalidInput);
    }
}

#[test]
fn ramsey_simulation_and_fit() {
    let p = builtin(RP_FAMILY_RECT, 1.0, 0.7 + FRAC_PI_2);
    let n = 20;
    let mut counts = vec![0u64; n];
    let mut direct = 0u64;
    let shots = 1_000_000;
    unsafe {
        assert_eq!(
            rp_ramsey_simulate(p, 0.0, 0.0, RP_G_AMPLITUDE, 1.0, shots, n as u32, 3, counts.as_mut_ptr(), n, &mut direct),
            RpStatus::Ok
        );
        rp_pulse_free(p);
    }
    let phases: Vec<f64> = (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
    let mut fit = RpFit::default();
    unsafe {
        assert_eq!(
            rp_fit_fringe(phases.as_ptr(), counts.as_ptr(), n, shots, direct, shots, &mut fit),
            RpStatus::Ok
        );
    }
    assert!((fit.theta_m - 1.0).abs() < 4.0 * fit.sigma_theta + 1e-3, "{fit:?}");
    assert!((fit.phi_m - 0.7).abs() < 4.0 * fit.sigma_phi + 1e-3, "{fit:?}");

    let flat = vec![500u64; n];
    unsafe {
        assert_eq!(
            rp_fit_fringe(phases.as_ptr(), flat.as_ptr(), n, 1000, 0, 1000, &mut fit),
            RpStatus::FitDegenerate
        );
    }
    assert!(fit.theta_m.abs() < 1e-6 && fit.phi_m.is_nan());
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(rp_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn header_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("robustpulse.h")
}

fn exported_symbols() -> Vec<String> {
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src").join("lib.rs")).unwrap();
    src.split("extern \"C\" fn ")
        .skip(1)
        .map(|rest| rest.split('(').next().unwrap().trim().to_string())
        .collect()
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(header_path()).unwrap();
    let symbols = exported_symbols();
    assert!(symbols.len() >= 20);
    for s in &symbols {
        assert!(header.contains(&format!("{s}(")), "{s} missing from header");
    }
    for item in ["typedef struct RpPulse RpPulse;", "typedef struct RpGrid RpGrid;", "RP_STATUS_BUFFER_TOO_SMALL = 11"] {
        assert!(header.contains(item), "{item} missing from header");
    }
}

fn c_compiler() -> Option<String> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .map(str::to_string)
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let Some(cc) = c_compiler() else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    for lang in ["c", "c++"] {
        let out = Command::new(&cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(header_path())
            .output()
            .unwrap();
        assert!(out.status.success(), "{lang}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "robustpulse.h"

int main(void) {
    RpPulse *corpse = NULL;
    RpPulse *rect = NULL;
    double rabi = rp_default_rabi();
    if (rp_pulse_builtin(RP_FAMILY_CORPSE, M_PI, 0.0, 0, 1, rabi, &corpse) != RP_STATUS_OK) return 1;
    if (rp_pulse_builtin(RP_FAMILY_RECT, M_PI, 0.0, 0, 1, rabi, &rect) != RP_STATUS_OK) return 2;
    double fc = 0.0, fr = 0.0;
    rp_state_fidelity(corpse, M_PI, 0.0, 0.2, 0.0, RP_G_AMPLITUDE, &fc);
    rp_state_fidelity(rect, M_PI, 0.0, 0.2, 0.0, RP_G_AMPLITUDE, &fr);
    if (!(fc > fr)) return 3;
    if (rp_pulse_builtin(RP_FAMILY_CORPSE, 1.0, 0.0, 0, 1, rabi, &rect) != RP_STATUS_INVALID_THETA) return 4;
    printf("%.6f %.6f %s\n", fc, fr, rp_last_error_message());
    rp_pulse_free(corpse);
    return 0;
}
"#;

#[test]
fn c_program_links_against_static_library() {
    let Some(cc) = c_compiler() else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("librobustpulse_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built, skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let bin = dir.path().join("smoke");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let out = Command::new(&cc)
        .arg("-D_DEFAULT_SOURCE")
        .arg("-I")
        .arg(header_path().parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.contains("invalid rotation angle"), "{stdout}");
}

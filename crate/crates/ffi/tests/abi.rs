use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use edgebarrier::{Family, SamplerModel};
use edgebarrier_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(eb_last_error_message()) }.to_str().unwrap().to_string()
}

#[test]
fn spectrum_roundtrip_and_update() {
    let a = [4.0, 1.0, 0.0, 1.0, 3.0, 0.0, 0.0, 0.0, 1.0];
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { eb_spectrum_from_matrix(a.as_ptr(), 3, &mut s) }, EbStatus::Ok);
    assert_eq!(unsafe { eb_spectrum_dim(s) }, 3);

    let x = [1.0, -1.0, 2.0];
    let mut values = [[0.0; 3]; 2];
    for (slot, incremental) in [(0, 1), (1, 0)] {
        let mut updated = ptr::null_mut();
        let status = unsafe { eb_spectrum_rank_one_update(s, x.as_ptr(), 3, incremental, &mut updated) };
        assert_eq!(status, EbStatus::Ok);
        assert_eq!(unsafe { eb_spectrum_eigenvalues(updated, values[slot].as_mut_ptr(), 3) }, EbStatus::Ok);
        unsafe { eb_spectrum_free(updated) };
    }
    for (p, q) in values[0].iter().zip(&values[1]) {
        assert!((p - q).abs() < 1e-10);
    }
    // Trace of A + xxᵀ is 8 + 6.
    assert!((values[0].iter().sum::<f64>() - 14.0).abs() < 1e-10);

    let mut short = [0.0; 2];
    assert_eq!(unsafe { eb_spectrum_eigenvalues(s, short.as_mut_ptr(), 2) }, EbStatus::InvalidArgument);
    assert!(last_error().contains("dimension mismatch"));
    unsafe { eb_spectrum_free(s) };
    unsafe { eb_spectrum_free(ptr::null_mut()) };
}

#[test]
fn scalar_entry_points_validate_input() {
    let mut out = 0.0;
    assert_eq!(unsafe { eb_mp_density(0.25, 1.0, &mut out) }, EbStatus::Ok);
    let expected = ((2.25f64 - 1.0) * (1.0 - 0.25)).sqrt() / (2.0 * std::f64::consts::PI * 0.25);
    assert!((out - expected).abs() < 1e-14);
    assert_eq!(unsafe { eb_mp_density(4.0, 0.0, &mut out) }, EbStatus::Precondition);
    assert_eq!(unsafe { eb_mp_density(-1.0, 0.5, &mut out) }, EbStatus::InvalidArgument);
    assert_eq!(unsafe { eb_select_alpha(1.0, 0.05, ptr::null_mut()) }, EbStatus::NullPointer);
    assert_eq!(unsafe { eb_select_alpha(1.0, 0.05, &mut out) }, EbStatus::Ok);
    assert!((out - 0.05 * 0.5 / 1.55).abs() < 1e-15);
    assert_eq!(last_error(), "");
}

#[test]
fn walks_match_the_rust_api() {
    let model = SamplerModel::new(Family::Gaussian, 8, 3).unwrap();
    let batch = model.batch(128, 0).unwrap();
    let samples: Vec<f64> = (0..128).flat_map(|k| batch.row(k)).collect();

    let mut lower = ptr::null_mut();
    assert_eq!(unsafe { eb_lower_walk_run(samples.as_ptr(), 128, 8, 0.25, &mut lower) }, EbStatus::Ok);
    let mut summary = EbLowerWalkSummary::default();
    assert_eq!(unsafe { eb_lower_walk_summary(lower, &mut summary) }, EbStatus::Ok);
    let direct = edgebarrier::lower::run_lower_walk_on_batch(
        &batch,
        edgebarrier::lower::LowerShiftParams::new(0.25).unwrap(),
        Default::default(),
    )
    .unwrap();
    assert_eq!(summary.u_final, direct.u_final);
    assert_eq!(summary.hard_violations, 0);
    let mut barriers = vec![0.0; 128];
    assert_eq!(unsafe { eb_lower_walk_barriers(lower, barriers.as_mut_ptr(), 128) }, EbStatus::Ok);
    assert_eq!(barriers[127], summary.u_final);
    unsafe { eb_lower_walk_free(lower) };

    let mut upper = ptr::null_mut();
    assert_eq!(unsafe { eb_upper_walk_run(samples.as_ptr(), 128, 8, 0.25, 1.6, &mut upper) }, EbStatus::Ok);
    let mut summary = EbUpperWalkSummary::default();
    assert_eq!(unsafe { eb_upper_walk_summary(upper, &mut summary) }, EbStatus::Ok);
    assert!(summary.u_final > summary.lambda_max);
    assert!(summary.total_regularity <= summary.regularity_budget);
    unsafe { eb_upper_walk_free(upper) };

    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { eb_upper_walk_run(samples.as_ptr(), 128, 8, 0.5, 1.0, &mut bad) }, EbStatus::InvalidArgument);
    assert!(bad.is_null());
}

fn header() -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/edgebarrier.h")).unwrap()
}

#[test]
fn header_declares_every_entry_point() {
    let text = header();
    for symbol in [
        "eb_last_error_message",
        "eb_spectrum_from_matrix",
        "eb_spectrum_free",
        "eb_spectrum_dim",
        "eb_spectrum_eigenvalues",
        "eb_spectrum_rank_one_update",
        "eb_stieltjes_lower",
        "eb_stieltjes_upper",
        "eb_mp_edges",
        "eb_mp_density",
        "eb_select_alpha",
        "eb_lower_walk_run",
        "eb_lower_walk_free",
        "eb_lower_walk_summary",
        "eb_lower_walk_barriers",
        "eb_upper_walk_run",
        "eb_upper_walk_free",
        "eb_upper_walk_summary",
        "eb_upper_walk_barriers",
        "typedef struct EbSpectrum EbSpectrum;",
        "EB_STATUS_PANIC = 6",
    ] {
        assert!(text.contains(symbol), "{symbol}");
    }
}

fn static_library() -> PathBuf {
    // CARGO_TARGET_TMPDIR is <target>/tmp; libraries sit in <target>/<profile>.
    let target = Path::new(env!("CARGO_TARGET_TMPDIR")).parent().unwrap().to_path_buf();
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap().to_path_buf();
    [profile_dir, target.join("debug"), target.join("release")]
        .into_iter()
        .map(|d| d.join("libedgebarrier_ffi.a"))
        .find(|p| p.exists())
        .expect("static library built alongside the tests")
}

#[test]
fn c_program_links_against_the_static_library() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let exe = dir.path().join("smoke");
    let compiler = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(compiler)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(static_library())
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

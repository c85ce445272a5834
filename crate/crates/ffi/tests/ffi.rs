//! Calls through the C interface, checked against the Rust library.

use std::ffi::c_char;
use std::ptr;

use bufrelay::special::{exp_integral_e1, lambert_w, Branch};
use bufrelay_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 512];
    let n = unsafe { br_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(511)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn special_functions_match_the_library() {
    let mut out = 0.0;
    assert_eq!(unsafe { br_exp_integral_e1(0.7, &mut out) }, BrStatus::Ok);
    assert_eq!(out, exp_integral_e1(0.7).unwrap());
    assert_eq!(unsafe { br_lambert_w(BrBranch::Lower, -0.2, &mut out) }, BrStatus::Ok);
    assert_eq!(out, lambert_w(Branch::Lower, -0.2).unwrap());
    assert_eq!(last_error(), "");
}

#[test]
fn errors_map_to_status_codes() {
    let mut out = 1.5;
    assert_eq!(unsafe { br_exp_integral_e1(-1.0, &mut out) }, BrStatus::Domain);
    assert_eq!(out, 1.5);
    assert!(last_error().contains("domain"));
    assert_eq!(unsafe { br_lambert_w(BrBranch::Principal, -1.0, &mut out) }, BrStatus::Domain);
    assert_eq!(unsafe { br_tau_conv1(1.0, 1.0, ptr::null_mut()) }, BrStatus::NullPointer);
    assert!(last_error().contains("null"));

    let mut sol = BrSolution::default();
    let status = unsafe { br_solve_rho_for_delay(1.0, 1.0, 1.0, &mut sol) };
    assert_eq!(status, BrStatus::Infeasible);
    assert!(last_error().contains("infeasible"));

    // a later success clears the message
    assert_eq!(unsafe { br_tau_conv2(1.0, 1.0, &mut out) }, BrStatus::Ok);
    assert_eq!(last_error(), "");
}

#[test]
fn truncated_error_message_is_terminated() {
    let mut out = 0.0;
    unsafe { br_exp_integral_e1(-1.0, &mut out) };
    let mut buf = [1 as c_char; 8];
    let n = unsafe { br_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 7);
    assert_eq!(buf[7], 0);
    assert_eq!(unsafe { br_last_error_message(ptr::null_mut(), 0) }, n);
}

#[test]
fn solvers_reach_symmetric_optimum() {
    let mut sol = BrSolution::default();
    assert_eq!(unsafe { br_solve_rho_opt(BrDecision::Identity, 1.0, 1.0, &mut sol) }, BrStatus::Ok);
    assert!((sol.rho - 1.0).abs() < 1e-9);
    assert!((sol.tau - 0.599704).abs() < 1e-6);
    assert!(sol.converged && sol.lambda.is_nan());

    let mut bal = BrBalance::default();
    let status = unsafe { br_threshold_balance(BrDecision::Identity, 1.0, 1.0, 1.0, &mut bal) };
    assert_eq!(status, BrStatus::Ok);
    assert!(bal.residual.abs() < 1e-9);

    let mut pa = BrSolution::default();
    assert_eq!(unsafe { br_solve_lambda_rho(0.1, 1.9, 1.0, &mut pa) }, BrStatus::Ok);
    assert!(pa.converged && pa.lambda > 0.0);
    assert!(pa.tau > 0.2 && pa.tau < 0.3);
}

#[test]
fn delay_solver_inverts_bound() {
    let mut sol = BrSolution::default();
    assert_eq!(unsafe { br_solve_rho_for_delay(10.0, 1.0, 1.0, &mut sol) }, BrStatus::Ok);
    let mut point = BrDelayPoint::default();
    assert_eq!(unsafe { br_delay_bound(sol.rho, 1.0, 1.0, &mut point) }, BrStatus::Ok);
    assert!((point.bound - 10.0).abs() < 1e-6);
    assert!(point.xi > 0.0 && point.xi < 1.0);
    assert!((point.m_s1 - sol.tau).abs() < 1e-12);
}

#[test]
fn simulation_handle_round_trip() {
    let mut cfg = ptr::null_mut();
    let status = unsafe { br_sim_config_new(BrProtocol::QueueLimited, 1.0, 0.5, 50_000, &mut cfg) };
    assert_eq!(status, BrStatus::Ok);
    unsafe {
        assert_eq!(br_sim_config_set_threshold(cfg, BrDecision::Identity, 0.3), BrStatus::Ok);
        assert_eq!(br_sim_config_set_q_max(cfg, 4.0), BrStatus::Ok);
        assert_eq!(br_sim_config_set_seed(cfg, 11, 2), BrStatus::Ok);
        assert_eq!(br_sim_config_set_warmup(cfg, 1000), BrStatus::Ok);
        assert_eq!(br_sim_config_set_overflow_threshold(cfg, 3.0), BrStatus::Ok);
    }
    let mut a = BrMetrics::default();
    let mut b = BrMetrics::default();
    assert_eq!(unsafe { br_simulate(cfg, &mut a) }, BrStatus::Ok);
    assert_eq!(unsafe { br_simulate(cfg, &mut b) }, BrStatus::Ok);
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    assert_eq!(a.slots_measured, 49_000);
    assert!(a.mean_queue <= 4.0);
    assert!(a.overflow_event_prob >= 0.0 && a.overflow_event_prob <= 1.0);
    assert!(a.mean_power.is_nan());

    unsafe { br_sim_config_set_q_max(cfg, -1.0) };
    assert_eq!(unsafe { br_simulate(cfg, &mut a) }, BrStatus::Config);
    unsafe { br_sim_config_free(cfg) };
    assert_eq!(unsafe { br_simulate(ptr::null(), &mut a) }, BrStatus::NullPointer);
}

#[test]
fn power_allocation_simulation_meets_budget() {
    let mut sol = BrSolution::default();
    assert_eq!(unsafe { br_solve_lambda_rho(0.1, 1.9, 1.0, &mut sol) }, BrStatus::Ok);
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(br_sim_config_new(BrProtocol::AdaptivePa, 0.1, 1.9, 200_000, &mut cfg), BrStatus::Ok);
        br_sim_config_set_threshold(cfg, BrDecision::LogCapacity, sol.rho);
        br_sim_config_set_power(cfg, sol.lambda, 1.0);
    }
    let mut m = BrMetrics::default();
    assert_eq!(unsafe { br_simulate(cfg, &mut m) }, BrStatus::Ok);
    unsafe { br_sim_config_free(cfg) };
    assert!((m.mean_power - 1.0).abs() < 0.03, "power {}", m.mean_power);
    assert!((m.throughput / sol.tau - 1.0).abs() < 0.03);
}

#[test]
fn buffer_handle_tracks_fifo_delay() {
    let mut buf = ptr::null_mut();
    assert_eq!(unsafe { br_buffer_new(3.0, &mut buf) }, BrStatus::Ok);
    let mut admitted = 0.0;
    let mut sent = 0.0;
    unsafe {
        assert_eq!(br_buffer_enqueue(buf, 2.0, 0, &mut admitted), BrStatus::Ok);
        assert_eq!(admitted, 2.0);
        assert_eq!(br_buffer_enqueue(buf, 2.0, 1, &mut admitted), BrStatus::Ok);
        assert_eq!(admitted, 1.0);
        assert_eq!(br_buffer_len_bits(buf), 3.0);
        assert!(br_buffer_mean_delay(buf).is_nan());
        assert_eq!(br_buffer_dequeue(buf, 2.0, 4, &mut sent), BrStatus::Ok);
        assert_eq!(sent, 2.0);
        assert_eq!(br_buffer_mean_delay(buf), 4.0);
        assert_eq!(br_buffer_enqueue(buf, -1.0, 5, ptr::null_mut()), BrStatus::InvalidArgument);
        br_buffer_free(buf);
        br_buffer_free(ptr::null_mut());
        assert!(br_buffer_len_bits(ptr::null()).is_nan());
    }
    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { br_buffer_new(-1.0, &mut bad) }, BrStatus::Config);
    assert!(bad.is_null());
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/bufrelay.h");
    let source = include_str!("../src/lib.rs");
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.strip_prefix("pub unsafe extern \"C\" fn "))
        .map(|l| l.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 20);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}

#[test]
fn c_program_links_against_static_library() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".to_string());
    if std::process::Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler `{cc}`");
        return;
    }
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/<test binary>
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libbufrelay_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = std::process::Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = std::process::Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

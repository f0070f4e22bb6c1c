use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ineqstat_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ineq_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn model_round_trip() {
    let mut m = ptr::null_mut();
    assert_eq!(ineq_model_new(48.0, 1.34, 113.0, &mut m), IneqStatus::Ok);
    let mut c = 0.0;
    assert_eq!(ineq_model_ccdf(m, 0.0, &mut c), IneqStatus::Ok);
    assert!((c - 1.0).abs() < 1e-12);
    let mut r = 0.0;
    assert_eq!(ineq_model_inverse_ccdf(m, 0.03, &mut r), IneqStatus::Ok);
    assert_eq!(ineq_model_ccdf(m, r, &mut c), IneqStatus::Ok);
    assert!((c - 0.03).abs() < 1e-9);
    let mut mean = 0.0;
    assert_eq!(ineq_model_mean(m, &mut mean), IneqStatus::Ok);
    assert!(mean > 48.0);
    assert_eq!(ineq_model_pdf(m, -1.0, &mut c), IneqStatus::Domain);
    assert!(!last_error().is_empty());
    ineq_model_free(m);
    ineq_model_free(ptr::null_mut());
}

#[test]
fn invalid_arguments_map_to_codes() {
    let mut m = ptr::null_mut();
    assert_eq!(ineq_model_new(48.0, 0.5, 113.0, &mut m), IneqStatus::Domain);
    assert!(m.is_null());
    assert!(last_error().contains("exponent"), "{}", last_error());
    assert_eq!(ineq_model_new(48.0, 1.5, 113.0, ptr::null_mut()), IneqStatus::NullPointer);
    let mut v = 0.0;
    assert_eq!(ineq_model_mean(ptr::null(), &mut v), IneqStatus::NullPointer);
    let (mut rs, mut uf) = (0.0, 0.0);
    assert_eq!(ineq_class_boundary(1.0, 1.5, 1.0, 1e9, &mut rs, &mut uf), IneqStatus::NoIntersection);
}

#[test]
fn lorenz_and_boundary() {
    let mut y = 0.0;
    assert_eq!(ineq_lorenz_exponential(0.5, &mut y), IneqStatus::Ok);
    assert!((y - 0.1534264097).abs() < 1e-9);
    assert_eq!(ineq_lorenz_two_class(1.0, 0.2, &mut y), IneqStatus::Ok);
    assert_eq!(ineq_lorenz_exponential(1.5, &mut y), IneqStatus::Domain);
    let t: f64 = 10.0;
    let r_star = 3.5 * t;
    let alpha: f64 = 1.5;
    let c2 = (-3.5f64).exp() * r_star.powf(alpha);
    let (mut rs, mut uf) = (0.0, 0.0);
    assert_eq!(ineq_class_boundary(t, alpha, 1.0, c2, &mut rs, &mut uf), IneqStatus::Ok);
    assert!((rs - r_star).abs() < 1e-8);
    assert!((uf - (-3.5f64).exp()).abs() < 1e-10);
}

#[test]
fn engine_conserves_money() {
    let mut e = ptr::null_mut();
    assert_eq!(ineq_engine_new(100, 5000, IneqRule::Uniform, 1, 0, 9, &mut e), IneqStatus::Ok);
    assert_eq!(ineq_engine_run(e, 200_000), IneqStatus::Ok);
    let mut sum = 0i64;
    assert_eq!(ineq_engine_balance_sum(e, &mut sum), IneqStatus::Ok);
    assert_eq!(sum, 5000);
    let mut n = 0usize;
    assert_eq!(ineq_engine_balances(e, ptr::null_mut(), 0, &mut n), IneqStatus::Ok);
    assert_eq!(n, 100);
    let mut buf = vec![0i64; n];
    assert_eq!(ineq_engine_balances(e, buf.as_mut_ptr(), buf.len(), &mut n), IneqStatus::Ok);
    assert_eq!(buf.iter().sum::<i64>(), 5000);
    let (mut t, mut mu, mut s) = (0.0, 0.0, 0.0);
    assert_eq!(ineq_engine_thermo(e, &mut t, &mut mu), IneqStatus::Ok);
    assert_eq!(t, 50.0);
    assert_eq!(ineq_engine_entropy(e, &mut s), IneqStatus::Ok);
    assert!(s > 0.0);
    ineq_engine_free(e);

    let mut e = ptr::null_mut();
    assert_eq!(ineq_engine_new(0, 10, IneqRule::Fixed, 1, 0, 1, &mut e), IneqStatus::Domain);
    assert_eq!(ineq_engine_new(10, 10, IneqRule::Fixed, 1, 5, 1, &mut e), IneqStatus::Domain);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(ineq_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/ineqstat.h")
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    let src = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .split("pub extern \"C\" fn ")
        .skip(1)
        .map(|s| s.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(text.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(text.contains("typedef struct IneqModel IneqModel;"));
    assert!(text.contains("INEQ_STATUS_OK = 0"));
}

/// Compiles a small C program against the header and the static library.
#[test]
fn c_program_links_against_staticlib() {
    let Some(cc) = ["cc", "gcc", "clang"].into_iter().find(|c| Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("SKIP: no C compiler found");
        return;
    };
    // the test binary sits in target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libineqstat_ffi.a");
    if !lib.exists() {
        eprintln!("SKIP: {} not built", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let c_src = dir.path().join("probe.c");
    std::fs::write(
        &c_src,
        r#"
#include <stdio.h>
#include "ineqstat.h"
int main(void) {
    IneqModel *m = NULL;
    if (ineq_model_new(48.0, 1.34, 113.0, &m) != INEQ_STATUS_OK) return 1;
    double c = 0.0;
    if (ineq_model_ccdf(m, 0.0, &c) != INEQ_STATUS_OK) return 2;
    ineq_model_free(m);
    if (ineq_model_new(1.0, 0.5, 1.0, &m) != INEQ_STATUS_DOMAIN) return 3;
    IneqEngine *e = NULL;
    if (ineq_engine_new(50, 500, INEQ_RULE_FIXED, 1, 0, 3, &e) != INEQ_STATUS_OK) return 4;
    ineq_engine_run(e, 10000);
    int64_t sum = 0;
    ineq_engine_balance_sum(e, &sum);
    ineq_engine_free(e);
    printf("%.6f %lld\n", c, (long long)sum);
    return sum == 500 ? 0 : 5;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("probe");
    let status = Command::new(cc)
        .arg(&c_src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "probe exited with {:?}", run.status);
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "1.000000 500");
}

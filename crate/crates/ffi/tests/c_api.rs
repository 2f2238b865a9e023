use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use tpcluster_ffi::*;

fn last_error() -> String {
    let p = tp_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn config(id: &str) -> *mut TpConfig {
    let id = CString::new(id).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { tp_config_parse(id.as_ptr(), &mut cfg) }, TpStatus::Ok);
    cfg
}

fn run(cfg: *const TpConfig, bench: &str, variant: &str, size: usize) -> Result<*mut TpRun, TpStatus> {
    let b = CString::new(bench).unwrap();
    let v = CString::new(variant).unwrap();
    let mut out = ptr::null_mut();
    match unsafe { tp_run(cfg, b.as_ptr(), v.as_ptr(), size, 1, 0, &mut out) } {
        TpStatus::Ok => Ok(out),
        s => Err(s),
    }
}

#[test]
fn run_reports_counters_and_flops() {
    let cfg = config("8c4f1p");
    let r = run(cfg, "matmul", "scalar", 16).unwrap();
    unsafe {
        assert_eq!(tp_run_flops(r), 2 * 16 * 16 * 16);
        assert_eq!(tp_run_cores(r), 8);
        let cycles = tp_run_cycles(r);
        let mut c = TpCounters::default();
        assert_eq!(tp_run_counters(r, 7, &mut c), TpStatus::Ok);
        assert!(c.total <= cycles && c.active > 0);
        assert_eq!(tp_run_counters(r, 8, &mut c), TpStatus::OutOfRange);
        tp_run_free(r);
        tp_config_free(cfg);
    }
}

#[test]
fn bad_inputs_give_status_codes() {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { tp_config_new(8, 3, 1, &mut cfg) }, TpStatus::InvalidConfig);
    assert!(cfg.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { tp_config_new(8, 4, 1, ptr::null_mut()) }, TpStatus::NullPointer);
    let cfg = config("16c16f1p");
    assert_eq!(run(cfg, "nosuch", "scalar", 0).unwrap_err(), TpStatus::InvalidArgument);
    assert!(last_error().contains("nosuch"));
    assert_eq!(run(cfg, "fft", "f16", 1).unwrap_err(), TpStatus::KernelError);
    unsafe { tp_config_free(cfg) };
}

#[test]
fn metrics_need_both_corners() {
    let cfg = config("16c16f1p");
    let r = run(cfg, "fir", "scalar", 0).unwrap();
    let mut calib = ptr::null_mut();
    let mut m = TpMetrics::default();
    unsafe {
        assert_eq!(tp_calibration_default(&mut calib), TpStatus::Ok);
        assert_eq!(tp_metrics(r, calib, &mut m), TpStatus::MissingCalibration);
        assert!(last_error().contains("16c16f1p"));
        tp_calibration_free(calib);
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("calib.csv");
    std::fs::write(
        &path,
        "config_id,voltage,freq_mhz,power_mw,area_mm2,provenance\n\
         16c16f1p,0.80,400,100,2.0,estimated\n16c16f1p,0.65,250,25,2.0,estimated\n",
    )
    .unwrap();
    let p = CString::new(path.to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(tp_calibration_load(p.as_ptr(), &mut calib), TpStatus::Ok);
        assert_eq!(tp_metrics(r, calib, &mut m), TpStatus::Ok);
        let fpc = tp_run_flops(r) as f64 / tp_run_cycles(r) as f64;
        assert!((m.perf_gflops - fpc * 0.4).abs() < 1e-12);
        assert!((m.energy_eff_gflops_per_w - fpc * 0.25 / 0.025).abs() < 1e-9);
        assert_eq!(m.area_eff_gflops_per_mm2 * 2.0, m.perf_gflops);
        tp_calibration_free(calib);
        tp_run_free(r);
        tp_config_free(cfg);
    }
}

#[test]
fn arithmetic_on_raw_encodings() {
    let mut out = 0;
    unsafe {
        // 1.0 + 2.0 in binary16
        assert_eq!(tp_fp_op(TpFpOp::Add, TpFormat::F16, 0x3c00, 0x4000, &mut out), TpStatus::Ok);
        assert_eq!(out, 0x4200);
        assert_eq!(tp_fp_fma(TpFormat::F32, 2f32.to_bits(), 3f32.to_bits(), 1f32.to_bits(), &mut out), TpStatus::Ok);
        assert_eq!(f32::from_bits(out), 7.0);
        // 1 + 2^-8 rounds to even in bfloat16
        assert_eq!(tp_fp_convert(TpFormat::F32, 0x3f80_8000, TpFormat::Bf16, &mut out), TpStatus::Ok);
        assert_eq!(out, 0x3f80);
        assert_eq!(tp_fp_op(TpFpOp::Mul, TpFormat::F16, 0x1_0000, 0, &mut out), TpStatus::InvalidArgument);
    }
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/tpcluster.h")).unwrap();
    for name in ["tp_config_parse", "tp_run", "tp_run_counters", "tp_metrics", "tp_last_error", "TP_STATUS_OK", "typedef struct TpRun TpRun"] {
        assert!(h.contains(name), "{name} missing from header");
    }
}

/// Compile and run a C program against the header and the static library
/// when a C compiler and the archive are available.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libtpcluster_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.exists() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or {} missing", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "tpcluster.h"
int main(void) {
    TpConfig *cfg = NULL;
    TpRun *run = NULL;
    if (tp_config_new(16, 16, 1, &cfg) != TP_STATUS_OK) return 10;
    if (tp_run(cfg, "fir", "scalar", 0, 1, 0, &run) != TP_STATUS_OK) return 11;
    printf("%llu %llu\n", (unsigned long long)tp_run_cycles(run), (unsigned long long)tp_run_flops(run));
    if (tp_run(cfg, "bogus", "scalar", 0, 1, 0, &run) != TP_STATUS_INVALID_ARGUMENT) return 12;
    tp_run_free(run);
    tp_config_free(cfg);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    let text = String::from_utf8(out.stdout).unwrap();
    let nums: Vec<u64> = text.split_whitespace().map(|s| s.parse().unwrap()).collect();
    assert_eq!(nums[1], 2 * 1024 * 16);
    assert!(nums[0] > 0);
}

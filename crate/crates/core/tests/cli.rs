use std::process::{Command, Output};

fn tpcluster(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tpcluster")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn cycles(o: &Output) -> u64 {
    let text = stderr(o);
    let at = text.find(" cycles").expect("cycle count on stderr");
    text[..at].rsplit(' ').next().unwrap().parse().unwrap()
}

#[test]
fn run_prints_per_core_counters() {
    let o = tpcluster(&["run", "--benchmark", "fir", "--config", "8c4f1p"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("total,active,tcdm_contention"));
    assert_eq!(lines.count(), 8);
}

#[test]
fn explicit_shape_matches_config_id() {
    let a = tpcluster(&["run", "--benchmark", "matmul", "--variant", "f16", "--config", "16c8f2p"]);
    let b = tpcluster(&["run", "--benchmark", "matmul", "--variant", "f16", "--cores", "16", "--fpus", "8", "--stages", "2"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn unknown_names_are_usage_errors() {
    assert_eq!(tpcluster(&["run", "--benchmark", "nosuch", "--config", "8c4f1p"]).status.code(), Some(2));
    assert_eq!(tpcluster(&["run", "--benchmark", "fir", "--config", "8c3f1p"]).status.code(), Some(2));
    assert_eq!(tpcluster(&["run", "--benchmark", "fir", "--variant", "f64", "--config", "8c4f1p"]).status.code(), Some(2));
    assert_eq!(tpcluster(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn schedule_flag_never_costs_cycles() {
    for cfg in ["8c4f1p", "16c16f2p", "16c4f0p"] {
        let plain = tpcluster(&["run", "--benchmark", "fir", "--config", cfg]);
        let sched = tpcluster(&["run", "--benchmark", "fir", "--config", cfg, "--schedule"]);
        assert!(cycles(&sched) <= cycles(&plain), "{cfg}");
    }
}

#[test]
fn metrics_without_calibration_rows_exit_3() {
    let o = tpcluster(&["run", "--benchmark", "fir", "--config", "4c4f1p", "--metrics"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("4c4f1p"));
}

#[test]
fn run_metrics_reports_the_missing_corner() {
    let o = tpcluster(&["run", "--benchmark", "matmul", "--config", "16c16f1p", "--metrics"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("matmul,scalar,16c16f1p,"));
    assert!(row.ends_with(",paper,partial: no 0.65 V corner"), "{row}");
}

#[test]
fn sweep_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..2).map(|i| dir.path().join(format!("s{i}.csv"))).collect();
    for p in &paths {
        let o = tpcluster(&["sweep", "--benchmark", "fir,iir", "--config", "16c16f1p,8c4f1p,8c2f2p", "--out", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let a = std::fs::read(&paths[0]).unwrap();
    assert_eq!(a, std::fs::read(&paths[1]).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("NAVG,")).count(), 3);
    assert_eq!(text.lines().count(), 1 + 2 * 3 * 3 + 3);
}

#[test]
fn markdown_sweep_bolds_the_best_config() {
    let o = tpcluster(&["sweep", "--benchmark", "matmul", "--config", "16c16f1p,8c4f1p", "--format", "markdown"]);
    let text = stdout(&o);
    let row = text.lines().find(|l| l.starts_with("| matmul scalar |")).unwrap();
    let cells: Vec<_> = row.split('|').map(str::trim).collect();
    assert!(cells[2].starts_with("**") && !cells[3].starts_with("**"), "{row}");
}

#[test]
fn custom_calibration_file_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("calib.csv");
    std::fs::write(
        &path,
        "config_id,voltage,freq_mhz,power_mw,area_mm2,provenance\n\
         8c4f1p,0.80,400,60,1.0,estimated\n\
         8c4f1p,0.65,250,20,1.0,estimated\n",
    )
    .unwrap();
    let o = tpcluster(&["sweep", "--benchmark", "fir", "--variant", "scalar", "--config", "8c4f1p", "--calib", path.to_str().unwrap()]);
    let text = stdout(&o);
    let row = text.lines().nth(1).unwrap();
    assert!(row.ends_with(",estimated,ok"), "{row}");

    std::fs::write(&path, "config_id,voltage,freq_mhz,power_mw,area_mm2,provenance\n8c4f1p,0.80,-4,60,1.0,estimated\n").unwrap();
    let o = tpcluster(&["sweep", "--benchmark", "fir", "--config", "8c4f1p", "--calib", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn exhaustive_conversions() {
    let o = tpcluster(&["verify-fp", "--ops", "convert", "--exhaustive"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("convert-exhaustive,bf16,65536,0"));
    assert!(stderr(&o).contains("131072 cases checked, 0 mismatches"));
}

#[test]
fn injected_fault_is_reported_in_hex() {
    let o = tpcluster(&["verify-fp", "--ops", "add", "--samples", "2000", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("first mismatch: add") && err.contains("0x"), "{err}");
}

#[test]
fn calibration_template_lists_every_canonical_corner() {
    let o = tpcluster(&["calib-template"]);
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "config_id,voltage,freq_mhz,power_mw,area_mm2,provenance");
    assert_eq!(text.lines().count(), 37);
    assert!(text.contains("\n16c16f1p,0.80,370.0,110.0,2.1,paper\n"), "{text}");
    assert!(text.contains("\n16c16f1p,0.65,0.0,0.0,0.0,estimated\n"), "{text}");
}

use proptest::prelude::*;

use tpcluster::dse::*;
use tpcluster::kernels::{Benchmark, Variant};
use tpcluster::timing::{ClusterConfig, Counters};

/// Same frequency, power and area for every configuration, so metric
/// orderings follow cycle counts.
fn uniform_calibration() -> Calibration {
    let mut records = Vec::new();
    for cfg in ClusterConfig::canonical() {
        for (corner, freq) in [(Corner::V080, 400.0), (Corner::V065, 250.0)] {
            records.push(CalibrationRecord {
                config_id: cfg.id(),
                corner,
                freq_mhz: freq,
                power_mw: 50.0,
                area_mm2: 1.5,
                provenance: Provenance::Estimated,
            });
        }
    }
    Calibration { records }
}

fn both(id: &str, f08: f64, f065: f64, p065: f64, area: f64) -> Vec<CalibrationRecord> {
    let r = |corner, freq_mhz, power_mw| CalibrationRecord {
        config_id: id.into(),
        corner,
        freq_mhz,
        power_mw,
        area_mm2: area,
        provenance: Provenance::Paper,
    };
    vec![r(Corner::V080, f08, 100.0), r(Corner::V065, f065, p065)]
}

#[test]
fn published_performance_from_flops_per_cycle() {
    // 7.73 flop/cycle at 370 MHz
    let m = metrics(100, 773, &both("16c16f1p", 370.0, 300.0, 30.0, 2.1)).unwrap();
    assert!((m.perf_gflops - 2.86).abs() < 0.005, "{}", m.perf_gflops);
}

#[test]
fn area_efficiency_is_perf_over_area() {
    let m = metrics(1000, 4047, &both("8c4f1p", 430.0, 300.0, 30.0, 0.97)).unwrap();
    assert!((m.perf_gflops - 1.74).abs() < 0.001);
    assert!((m.area_eff - 1.79).abs() < 0.01);
    assert!((m.area_eff * 0.97 - m.perf_gflops).abs() <= f64::EPSILON * m.perf_gflops);
}

#[test]
fn missing_corner_names_config_and_corner() {
    let recs = Calibration::paper().for_config("8c4f1p");
    match metrics(10, 10, &recs) {
        Err(DseError::MissingCorner { config, corner }) => {
            assert_eq!(config, "8c4f1p");
            assert_eq!(corner, Corner::V065);
        }
        other => panic!("{other:?}"),
    }
}

fn small_plan(configs: Vec<ClusterConfig>) -> SweepPlan {
    SweepPlan { variants: vec![Variant::Scalar, Variant::F16], configs, ..SweepPlan::full() }
}

#[test]
fn full_sweep_rows_satisfy_the_metric_formulas() {
    let calib = uniform_calibration();
    let rows = sweep(&small_plan(ClusterConfig::canonical()), &calib);
    assert_eq!(rows.len(), 18 * 8 * 2);
    for r in &rows {
        assert_eq!(r.status, "ok", "{} {} {}", r.benchmark, r.variant, r.config_id);
        let fpc = r.flops as f64 / r.cycles as f64;
        let perf = r.perf_gflops.unwrap();
        assert!((perf - fpc * 0.4).abs() <= 1e-12 * perf);
        assert!((r.energy_eff.unwrap() - fpc * 0.25 / 0.05).abs() <= 1e-9);
        assert!((r.area_eff.unwrap() * 1.5 - perf).abs() <= f64::EPSILON * perf);
        assert_eq!(r.provenance, Some(Provenance::Estimated));
    }
    // ordered by benchmark, variant, then the plan's configuration order
    let ids: Vec<String> = ClusterConfig::canonical().iter().map(ClusterConfig::id).collect();
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.config_id, ids[i % 18]);
        assert_eq!(r.benchmark, Benchmark::ALL[i / 36]);
    }
}

#[test]
fn more_fpus_never_lower_performance() {
    let calib = uniform_calibration();
    let rows = sweep(&small_plan(ClusterConfig::canonical()), &calib);
    let perf = |b: Benchmark, v: Variant, id: &str| {
        rows.iter().find(|r| r.benchmark == b && r.variant == v && r.config_id == id).unwrap().perf_gflops.unwrap()
    };
    for b in Benchmark::ALL {
        for v in [Variant::Scalar, Variant::F16] {
            for c in [8, 16] {
                // with 2 stages the write-back port rule can make a private
                // FPU a few cycles slower than a shared one
                for p in 0..=1 {
                    let at = |f: usize| perf(b, v, &format!("{c}c{f}f{p}p"));
                    assert!(at(c) >= at(c / 2) && at(c / 2) >= at(c / 4), "{b} {v} {c}c {p}p");
                }
            }
        }
    }
}

#[test]
fn paper_calibration_marks_uncalibrated_configs() {
    let rows = sweep(&small_plan(ClusterConfig::canonical()), &Calibration::paper());
    let calibrated = ["16c16f1p", "16c16f0p", "8c4f1p"];
    for r in &rows {
        if calibrated.contains(&r.config_id.as_str()) {
            assert!(r.status.starts_with("partial"), "{}", r.status);
            assert_eq!(r.provenance, Some(Provenance::Paper));
        } else {
            assert_eq!(r.status, "no-calibration");
            assert!(r.perf_gflops.is_none() && r.cycles > 0);
        }
    }
}

#[test]
fn best_sixteen_core_performance_is_private_fpus_one_stage() {
    let configs: Vec<_> = ClusterConfig::canonical().into_iter().filter(|c| c.n_cores == 16).collect();
    let plan = SweepPlan {
        benchmarks: vec![Benchmark::Conv, Benchmark::Fft, Benchmark::Fir, Benchmark::Matmul],
        ..small_plan(configs)
    };
    let rows = sweep(&plan, &Calibration::paper());
    for b in &plan.benchmarks {
        let best = rows
            .iter()
            .filter(|r| r.benchmark == *b && r.perf_gflops.is_some())
            .max_by(|x, y| x.perf_gflops.partial_cmp(&y.perf_gflops).unwrap())
            .unwrap();
        assert_eq!(best.config_id, "16c16f1p");
    }
    let summary = normalize_summary(&rows);
    let best = summary.iter().filter(|s| s.perf.is_some()).max_by(|x, y| x.perf.partial_cmp(&y.perf).unwrap()).unwrap();
    assert_eq!(best.config_id, "16c16f1p");
}

#[test]
fn sweep_output_is_byte_identical_across_runs() {
    let plan = SweepPlan { benchmarks: vec![Benchmark::Fir, Benchmark::Kmeans], ..SweepPlan::full() };
    let render = || {
        let mut buf = Vec::new();
        write_csv(&mut buf, &sweep(&plan, &Calibration::paper()), true).unwrap();
        buf
    };
    let first = render();
    assert_eq!(first, render());
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with(&RESULT_HEADER.join(",")));
    assert_eq!(text.lines().filter(|l| l.starts_with("NAVG")).count(), 18);
}

#[test]
fn failing_cells_stay_in_the_matrix() {
    let plan = SweepPlan {
        benchmarks: vec![Benchmark::Conv],
        variants: vec![Variant::Scalar],
        configs: vec![ClusterConfig::new(8, 8, 1).unwrap()],
        dims: vec![(Benchmark::Conv, tpcluster::kernels::Dims { size: 3, taps: 5, ..tpcluster::kernels::Dims::default_for(Benchmark::Conv) })],
        ..SweepPlan::full()
    };
    let rows = sweep(&plan, &Calibration::paper());
    assert_eq!(rows.len(), 1);
    assert!(rows[0].status.starts_with("error:"), "{}", rows[0].status);
}

fn row(b: usize, cfg: usize, perf: f64) -> MetricRow {
    MetricRow {
        benchmark: Benchmark::ALL[b],
        variant: Variant::Scalar,
        config_id: format!("cfg{cfg}"),
        cycles: 1,
        flops: 1,
        counters: Counters::default(),
        perf_gflops: Some(perf),
        energy_eff: None,
        area_eff: None,
        provenance: None,
        status: "ok".into(),
    }
}

fn argmax(s: &[SummaryRow]) -> usize {
    let mut best = 0;
    for (i, r) in s.iter().enumerate() {
        if r.perf.unwrap() > s[best].perf.unwrap() {
            best = i;
        }
    }
    best
}

proptest! {
    #[test]
    fn normalized_selection_ignores_per_benchmark_scale(
        vals in prop::collection::vec(prop::collection::vec(0.1f64..10.0, 4), 3),
        scale in 0.01f64..100.0,
        which in 0usize..3,
    ) {
        let rows: Vec<MetricRow> = vals.iter().enumerate()
            .flat_map(|(b, vs)| vs.iter().enumerate().map(move |(c, &v)| row(b, c, v)))
            .collect();
        let scaled: Vec<MetricRow> = rows.iter().cloned().map(|mut r| {
            if r.benchmark == Benchmark::ALL[which] {
                r.perf_gflops = r.perf_gflops.map(|v| v * scale);
            }
            r
        }).collect();
        let a = normalize_summary(&rows);
        let b = normalize_summary(&scaled);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.perf.unwrap() - y.perf.unwrap()).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&x.perf.unwrap()));
        }
        prop_assert_eq!(argmax(&a), argmax(&b));
    }
}

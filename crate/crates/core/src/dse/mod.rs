//! Design-space exploration: run benchmarks over cluster configurations and
//! turn cycle counts into performance, energy efficiency and area
//! efficiency with a per-configuration calibration table.

mod report;

pub use report::{normalize_summary, write_csv, write_markdown, SummaryRow, RESULT_HEADER};

use std::fmt;
use std::io;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{self, Benchmark, Dims, KernelBuild, KernelError, KernelSpec, Variant};
use crate::sched::schedule_program;
use crate::timing::{simulate, ClusterConfig, Counters, SimError, SimResult};

#[derive(Debug, Error)]
pub enum DseError {
    #[error("no calibration for {config} at {corner}")]
    MissingCorner { config: String, corner: Corner },
    #[error("calibration rows for {config} at {corner} given twice")]
    DuplicateCorner { config: String, corner: Corner },
    #[error("calibration rows mix configurations {0} and {1}")]
    MixedConfigs(String, String),
    #[error("calibration line {line}: {msg}")]
    BadRecord { line: usize, msg: String },
    #[error("kernel footprint of {need} bytes exceeds the {have}-byte TCDM")]
    TcdmOverflow { need: u32, have: u32 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Supply-voltage corner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Corner {
    V065,
    V080,
}

impl Corner {
    pub fn volts(self) -> &'static str {
        match self {
            Corner::V065 => "0.65",
            Corner::V080 => "0.80",
        }
    }
}

impl fmt::Display for Corner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} V", self.volts())
    }
}

impl FromStr for Corner {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().trim_end_matches('V').trim().parse::<f64>() {
            Ok(v) if (v - 0.65).abs() < 1e-9 => Ok(Corner::V065),
            Ok(v) if (v - 0.80).abs() < 1e-9 => Ok(Corner::V080),
            _ => Err(format!("voltage `{s}` is not a supported corner (0.65 or 0.80)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Paper,
    Estimated,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Paper => "paper",
            Provenance::Estimated => "estimated",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationRecord {
    pub config_id: String,
    pub corner: Corner,
    pub freq_mhz: f64,
    pub power_mw: f64,
    pub area_mm2: f64,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct RawRecord {
    config_id: String,
    voltage: String,
    freq_mhz: f64,
    power_mw: f64,
    area_mm2: f64,
    provenance: Provenance,
}

pub const CALIBRATION_HEADER: &str = "config_id,voltage,freq_mhz,power_mw,area_mm2,provenance";

/// Calibration rows for any number of configurations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Calibration {
    pub records: Vec<CalibrationRecord>,
}

impl Calibration {
    /// The three design points whose frequency, power and area are
    /// published: best performance, best energy efficiency and best area
    /// efficiency, each at the corner it was reported at.
    pub fn paper() -> Self {
        let rec = |id: &str, corner, freq_mhz, power_mw, area_mm2| CalibrationRecord {
            config_id: id.to_string(),
            corner,
            freq_mhz,
            power_mw,
            area_mm2,
            provenance: Provenance::Paper,
        };
        Calibration {
            records: vec![
                rec("16c16f1p", Corner::V080, 370.0, 110.0, 2.10),
                rec("16c16f0p", Corner::V065, 300.0, 28.40, 1.80),
                rec("8c4f1p", Corner::V080, 430.0, 74.36, 0.97),
            ],
        }
    }

    pub fn from_reader<R: io::Read>(r: R) -> Result<Self, DseError> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(r);
        let mut records = Vec::new();
        for (i, row) in rd.deserialize::<RawRecord>().enumerate() {
            let line = i + 2;
            let raw = row.map_err(|e| DseError::BadRecord { line, msg: e.to_string() })?;
            let bad = |msg: String| DseError::BadRecord { line, msg };
            let corner = raw.voltage.parse().map_err(bad)?;
            raw.config_id.parse::<ClusterConfig>().map_err(|e| bad(e.to_string()))?;
            for (name, v) in [("freq_mhz", raw.freq_mhz), ("power_mw", raw.power_mw), ("area_mm2", raw.area_mm2)] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(bad(format!("{name} must be positive, got {v}")));
                }
            }
            records.push(CalibrationRecord {
                config_id: raw.config_id,
                corner,
                freq_mhz: raw.freq_mhz,
                power_mw: raw.power_mw,
                area_mm2: raw.area_mm2,
                provenance: raw.provenance,
            });
        }
        Ok(Calibration { records })
    }

    pub fn write<W: io::Write>(&self, out: W) -> Result<(), DseError> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(RawRecord {
                config_id: r.config_id.clone(),
                voltage: r.corner.volts().to_string(),
                freq_mhz: r.freq_mhz,
                power_mw: r.power_mw,
                area_mm2: r.area_mm2,
                provenance: r.provenance,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// A row per canonical configuration and corner: the published values
    /// where they exist, the remaining rows zero-valued and marked
    /// `estimated` for the user to fill in.
    pub fn template() -> Self {
        let paper = Calibration::paper();
        let mut records = Vec::new();
        for cfg in ClusterConfig::canonical() {
            for corner in [Corner::V065, Corner::V080] {
                let id = cfg.id();
                records.push(paper.find(&id, corner).cloned().unwrap_or(CalibrationRecord {
                    config_id: id,
                    corner,
                    freq_mhz: 0.0,
                    power_mw: 0.0,
                    area_mm2: 0.0,
                    provenance: Provenance::Estimated,
                }));
            }
        }
        Calibration { records }
    }

    pub fn find(&self, config_id: &str, corner: Corner) -> Option<&CalibrationRecord> {
        self.records.iter().find(|r| r.config_id == config_id && r.corner == corner)
    }

    pub fn for_config(&self, config_id: &str) -> Vec<CalibrationRecord> {
        self.records.iter().filter(|r| r.config_id == config_id).cloned().collect()
    }
}

/// Performance and efficiency figures of one run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    /// Gflop/s at 0.8 V.
    pub perf_gflops: f64,
    /// Gflop/s/W at 0.65 V.
    pub energy_eff: f64,
    /// Gflop/s/mm² at 0.8 V.
    pub area_eff: f64,
}

fn flops_per_cycle(cycles: u64, flops: u64) -> f64 {
    if cycles == 0 || flops == 0 {
        0.0
    } else {
        flops as f64 / cycles as f64
    }
}

fn corner_of(calib: &[CalibrationRecord], corner: Corner) -> Result<Option<&CalibrationRecord>, DseError> {
    let mut found = None;
    for r in calib {
        if r.config_id != calib[0].config_id {
            return Err(DseError::MixedConfigs(calib[0].config_id.clone(), r.config_id.clone()));
        }
        if r.corner == corner {
            if found.is_some() {
                return Err(DseError::DuplicateCorner { config: r.config_id.clone(), corner });
            }
            found = Some(r);
        }
    }
    Ok(found)
}

/// Whatever metrics the available corners allow.
pub fn partial_metrics(
    cycles: u64,
    flops: u64,
    calib: &[CalibrationRecord],
) -> Result<(Option<f64>, Option<f64>, Option<f64>), DseError> {
    let fpc = flops_per_cycle(cycles, flops);
    let hi = corner_of(calib, Corner::V080)?;
    let lo = corner_of(calib, Corner::V065)?;
    let perf = hi.map(|r| fpc * r.freq_mhz * 1e-3);
    let area = hi.zip(perf).map(|(r, p)| p / r.area_mm2);
    let energy = lo.map(|r| fpc * r.freq_mhz * 1e-3 / (r.power_mw * 1e-3));
    Ok((perf, energy, area))
}

/// All three metrics; both corners of the configuration must be present.
pub fn metrics(cycles: u64, flops: u64, calib: &[CalibrationRecord]) -> Result<Metrics, DseError> {
    let config = calib.first().map_or_else(|| "configuration".to_string(), |r| r.config_id.clone());
    let (perf, energy, area) = partial_metrics(cycles, flops, calib)?;
    let missing = |corner| DseError::MissingCorner { config: config.clone(), corner };
    Ok(Metrics {
        perf_gflops: perf.ok_or_else(|| missing(Corner::V080))?,
        energy_eff: energy.ok_or_else(|| missing(Corner::V065))?,
        area_eff: area.ok_or_else(|| missing(Corner::V080))?,
    })
}

/// Build a kernel for `cfg` and simulate it. With `schedule`, every core's
/// stream is list-scheduled for the configured pipeline depth and the
/// result is kept when it lowers the cluster cycle count.
pub fn run_kernel(spec: &KernelSpec, cfg: &ClusterConfig, schedule: bool) -> Result<(KernelBuild, SimResult), DseError> {
    let spec = KernelSpec { n_cores: cfg.n_cores, ..*spec };
    let mut build = kernels::build(&spec)?;
    if build.tcdm_bytes > cfg.tcdm_bytes {
        return Err(DseError::TcdmOverflow { need: build.tcdm_bytes, have: cfg.tcdm_bytes });
    }
    let sim = simulate(cfg, &build.programs)?;
    if schedule {
        // per-core scheduling cannot see FPU sharing or bank conflicts, so
        // the reordered programs are kept only if the cluster gets faster
        let programs: Vec<_> =
            build.programs.iter().map(|p| schedule_program(p, cfg.pipeline_stages)).collect::<Result<_, _>>()?;
        let scheduled = simulate(cfg, &programs)?;
        if scheduled.elapsed_cycles < sim.elapsed_cycles {
            build.programs = programs;
            return Ok((build, scheduled));
        }
    }
    Ok((build, sim))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub benchmark: Benchmark,
    pub variant: Variant,
    pub config_id: String,
    pub cycles: u64,
    pub flops: u64,
    pub counters: Counters,
    pub perf_gflops: Option<f64>,
    pub energy_eff: Option<f64>,
    pub area_eff: Option<f64>,
    /// `estimated` if any calibration row used is, else `paper`.
    pub provenance: Option<Provenance>,
    /// `ok`, `partial: ...`, `no-calibration` or `error: ...`.
    pub status: String,
}

/// What to sweep.
#[derive(Clone, Debug)]
pub struct SweepPlan {
    pub benchmarks: Vec<Benchmark>,
    pub variants: Vec<Variant>,
    pub configs: Vec<ClusterConfig>,
    /// Per-benchmark dimensions; benchmarks not listed use their defaults.
    pub dims: Vec<(Benchmark, Dims)>,
    pub seed: u64,
    pub schedule: bool,
}

impl SweepPlan {
    /// Every benchmark and variant over the 18 canonical configurations.
    pub fn full() -> Self {
        SweepPlan {
            benchmarks: Benchmark::ALL.to_vec(),
            variants: Variant::ALL.to_vec(),
            configs: ClusterConfig::canonical(),
            dims: Vec::new(),
            seed: kernels::DEFAULT_SEED,
            schedule: false,
        }
    }
}

fn cell(plan: &SweepPlan, b: Benchmark, v: Variant, cfg: &ClusterConfig, calib: &Calibration) -> MetricRow {
    let dims = plan.dims.iter().find(|d| d.0 == b).map_or_else(|| Dims::default_for(b), |d| d.1);
    let spec = KernelSpec::new(b, v, cfg.n_cores).with_dims(dims).with_seed(plan.seed);
    match run_kernel(&spec, cfg, plan.schedule) {
        Ok((build, sim)) => metric_row(&build, &sim, &cfg.id(), calib),
        Err(e) => MetricRow {
            benchmark: b,
            variant: v,
            config_id: cfg.id(),
            cycles: 0,
            flops: 0,
            counters: Counters::default(),
            perf_gflops: None,
            energy_eff: None,
            area_eff: None,
            provenance: None,
            status: format!("error: {e}"),
        },
    }
}

/// The result row of one simulated kernel with whatever metrics the
/// calibration rows of `config_id` allow.
pub fn metric_row(build: &KernelBuild, sim: &SimResult, config_id: &str, calib: &Calibration) -> MetricRow {
    let mut row = MetricRow {
        benchmark: build.spec.benchmark,
        variant: build.spec.variant,
        config_id: config_id.to_string(),
        cycles: sim.elapsed_cycles,
        flops: build.flops,
        counters: sim.sum(),
        perf_gflops: None,
        energy_eff: None,
        area_eff: None,
        provenance: None,
        status: String::new(),
    };
    let recs = calib.for_config(config_id);
    if recs.is_empty() {
        row.status = "no-calibration".into();
        return row;
    }
    match partial_metrics(row.cycles, row.flops, &recs) {
        Ok((p, e, a)) => {
            row.perf_gflops = p;
            row.energy_eff = e;
            row.area_eff = a;
            let estimated = recs.iter().any(|r| r.provenance == Provenance::Estimated);
            row.provenance = Some(if estimated { Provenance::Estimated } else { Provenance::Paper });
            row.status = match (p.is_some(), e.is_some()) {
                (true, true) => "ok".into(),
                (true, false) => format!("partial: no {} corner", Corner::V065),
                _ => format!("partial: no {} corner", Corner::V080),
            };
        }
        Err(e) => row.status = format!("error: {e}"),
    }
    row
}

/// Run every (benchmark, variant, configuration) cell. Cells run in
/// parallel; rows come back ordered by benchmark, variant and the plan's
/// configuration order. Failures stay in their row's status.
pub fn sweep(plan: &SweepPlan, calib: &Calibration) -> Vec<MetricRow> {
    let mut cells = Vec::new();
    for &b in &plan.benchmarks {
        for &v in &plan.variants {
            for cfg in &plan.configs {
                cells.push((b, v, cfg));
            }
        }
    }
    cells.par_iter().map(|&(b, v, cfg)| cell(plan, b, v, cfg, calib)).collect()
}

//! C interface to the tpcluster simulator.
//!
//! Objects are opaque handles created by `tp_*_new`/`tp_*_load` functions
//! and released with the matching `tp_*_free`. Every fallible call returns
//! a [`TpStatus`]; on failure `tp_last_error` describes the problem until
//! the next failing call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tpcluster::dse::{self, Calibration, DseError};
use tpcluster::kernels::{Benchmark, KernelBuild, KernelSpec, Variant};
use tpcluster::timing::{ClusterConfig, Counters, SimResult};
use tpcluster::tpfloat::{soft, FpFormat};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    KernelError = 4,
    SimulationError = 5,
    MissingCalibration = 6,
    Io = 7,
    OutOfRange = 8,
    Panic = 99,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TpFormat {
    F32 = 0,
    F16 = 1,
    Bf16 = 2,
}

impl From<TpFormat> for FpFormat {
    fn from(f: TpFormat) -> Self {
        match f {
            TpFormat::F32 => FpFormat::F32,
            TpFormat::F16 => FpFormat::F16,
            TpFormat::Bf16 => FpFormat::BF16,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TpFpOp {
    Add = 0,
    Sub = 1,
    Mul = 2,
    Div = 3,
}

/// Cycle counters of one core.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TpCounters {
    pub total: u64,
    pub active: u64,
    pub tcdm_contention: u64,
    pub l2_stall: u64,
    pub fpu_stall: u64,
    pub fpu_contention: u64,
    pub fpu_wb_stall: u64,
    pub icache_miss: u64,
}

impl From<Counters> for TpCounters {
    fn from(c: Counters) -> Self {
        TpCounters {
            total: c.total,
            active: c.active,
            tcdm_contention: c.tcdm_contention,
            l2_stall: c.l2_stall,
            fpu_stall: c.fpu_stall,
            fpu_contention: c.fpu_contention,
            fpu_wb_stall: c.fpu_wb_stall,
            icache_miss: c.icache_miss,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TpMetrics {
    pub perf_gflops: f64,
    pub energy_eff_gflops_per_w: f64,
    pub area_eff_gflops_per_mm2: f64,
}

/// A cluster configuration.
pub struct TpConfig(ClusterConfig);

/// A simulated kernel run.
pub struct TpRun {
    build: KernelBuild,
    sim: SimResult,
    config_id: String,
}

/// A calibration table.
pub struct TpCalibration(Calibration);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn fail(status: TpStatus, msg: impl ToString) -> TpStatus {
    let msg = CString::new(msg.to_string().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
    status
}

fn guard(f: impl FnOnce() -> TpStatus) -> TpStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(TpStatus::Panic, "internal panic"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, TpStatus> {
    if p.is_null() {
        return Err(fail(TpStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(TpStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn give<T>(out: *mut *mut T, v: T) -> TpStatus {
    // SAFETY: callers check `out` for null first.
    unsafe { *out = Box::into_raw(Box::new(v)) };
    TpStatus::Ok
}

fn dse_status(e: &DseError) -> TpStatus {
    match e {
        DseError::MissingCorner { .. } => TpStatus::MissingCalibration,
        DseError::Kernel(_) | DseError::TcdmOverflow { .. } => TpStatus::KernelError,
        DseError::Sim(_) => TpStatus::SimulationError,
        DseError::Io(_) | DseError::Csv(_) | DseError::BadRecord { .. } => TpStatus::Io,
        DseError::DuplicateCorner { .. } | DseError::MixedConfigs(..) => TpStatus::InvalidArgument,
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Create a configuration from core, FPU and pipeline-stage counts.
///
/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn tp_config_new(cores: usize, fpus: usize, stages: u8, out: *mut *mut TpConfig) -> TpStatus {
    guard(|| {
        if out.is_null() {
            return fail(TpStatus::NullPointer, "out is null");
        }
        match ClusterConfig::new(cores, fpus, stages) {
            Ok(c) => give(out, TpConfig(c)),
            Err(e) => fail(TpStatus::InvalidConfig, e),
        }
    })
}

/// Create a configuration from an id such as `"16c8f1p"`.
///
/// # Safety
/// `id` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tp_config_parse(id: *const c_char, out: *mut *mut TpConfig) -> TpStatus {
    guard(|| {
        if out.is_null() {
            return fail(TpStatus::NullPointer, "out is null");
        }
        let id = match text(id, "id") {
            Ok(s) => s,
            Err(s) => return s,
        };
        match id.parse::<ClusterConfig>() {
            Ok(c) => give(out, TpConfig(c)),
            Err(e) => fail(TpStatus::InvalidConfig, e),
        }
    })
}

/// # Safety
/// `cfg` must come from `tp_config_new`/`tp_config_parse` or be null.
#[no_mangle]
pub unsafe extern "C" fn tp_config_free(cfg: *mut TpConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Build `benchmark` (e.g. `"fir"`) in `variant` (`"scalar"`, `"f16"`,
/// `"bf16"`) and simulate it on `cfg`. `size` 0 keeps the default problem
/// size. With `schedule` nonzero the instruction streams are list-scheduled
/// and kept if that makes the run faster.
///
/// # Safety
/// Strings must be NUL-terminated; `cfg` a live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tp_run(
    cfg: *const TpConfig,
    benchmark: *const c_char,
    variant: *const c_char,
    size: usize,
    seed: u64,
    schedule: i32,
    out: *mut *mut TpRun,
) -> TpStatus {
    guard(|| {
        if cfg.is_null() || out.is_null() {
            return fail(TpStatus::NullPointer, "cfg or out is null");
        }
        let cfg = &(*cfg).0;
        let (b, v) = match (text(benchmark, "benchmark"), text(variant, "variant")) {
            (Ok(b), Ok(v)) => (b, v),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let b: Benchmark = match b.parse() {
            Ok(b) => b,
            Err(e) => return fail(TpStatus::InvalidArgument, e),
        };
        let Some(v) = Variant::ALL.into_iter().find(|x| x.name() == v) else {
            return fail(TpStatus::InvalidArgument, format!("unknown variant `{v}`"));
        };
        let mut spec = KernelSpec::new(b, v, cfg.n_cores).with_seed(seed);
        if size > 0 {
            spec.dims.size = size;
        }
        match dse::run_kernel(&spec, cfg, schedule != 0) {
            Ok((build, sim)) => give(out, TpRun { build, sim, config_id: cfg.id() }),
            Err(e) => fail(dse_status(&e), e),
        }
    })
}

/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tp_run_cycles(run: *const TpRun) -> u64 {
    run.as_ref().map_or(0, |r| r.sim.elapsed_cycles)
}

/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tp_run_flops(run: *const TpRun) -> u64 {
    run.as_ref().map_or(0, |r| r.build.flops)
}

/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tp_run_cores(run: *const TpRun) -> usize {
    run.as_ref().map_or(0, |r| r.sim.per_core.len())
}

/// Counters of `core`.
///
/// # Safety
/// `run` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tp_run_counters(run: *const TpRun, core: usize, out: *mut TpCounters) -> TpStatus {
    guard(|| {
        let (Some(r), false) = (run.as_ref(), out.is_null()) else {
            return fail(TpStatus::NullPointer, "run or out is null");
        };
        match r.sim.per_core.get(core) {
            Some(c) => {
                *out = (*c).into();
                TpStatus::Ok
            }
            None => fail(TpStatus::OutOfRange, format!("core {core} of {}", r.sim.per_core.len())),
        }
    })
}

/// # Safety
/// `run` must come from `tp_run` or be null.
#[no_mangle]
pub unsafe extern "C" fn tp_run_free(run: *mut TpRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// The calibration rows published for the three reference design points.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tp_calibration_default(out: *mut *mut TpCalibration) -> TpStatus {
    guard(|| {
        if out.is_null() {
            return fail(TpStatus::NullPointer, "out is null");
        }
        give(out, TpCalibration(Calibration::paper()))
    })
}

/// Read a calibration CSV.
///
/// # Safety
/// `path` must be NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tp_calibration_load(path: *const c_char, out: *mut *mut TpCalibration) -> TpStatus {
    guard(|| {
        if out.is_null() {
            return fail(TpStatus::NullPointer, "out is null");
        }
        let path = match text(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let f = match File::open(path) {
            Ok(f) => f,
            Err(e) => return fail(TpStatus::Io, format!("{path}: {e}")),
        };
        match Calibration::from_reader(f) {
            Ok(c) => give(out, TpCalibration(c)),
            Err(e) => fail(dse_status(&e), e),
        }
    })
}

/// # Safety
/// `calib` must come from a `tp_calibration_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn tp_calibration_free(calib: *mut TpCalibration) {
    if !calib.is_null() {
        drop(Box::from_raw(calib));
    }
}

/// Performance, energy efficiency and area efficiency of `run`. Fails with
/// `MissingCalibration` unless `calib` has both voltage corners of the
/// run's configuration.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn tp_metrics(run: *const TpRun, calib: *const TpCalibration, out: *mut TpMetrics) -> TpStatus {
    guard(|| {
        let (Some(r), Some(c), false) = (run.as_ref(), calib.as_ref(), out.is_null()) else {
            return fail(TpStatus::NullPointer, "run, calib or out is null");
        };
        let recs = c.0.for_config(&r.config_id);
        if recs.is_empty() {
            return fail(TpStatus::MissingCalibration, format!("no calibration rows for {}", r.config_id));
        }
        match dse::metrics(r.sim.elapsed_cycles, r.build.flops, &recs) {
            Ok(m) => {
                *out = TpMetrics {
                    perf_gflops: m.perf_gflops,
                    energy_eff_gflops_per_w: m.energy_eff,
                    area_eff_gflops_per_mm2: m.area_eff,
                };
                TpStatus::Ok
            }
            Err(e) => fail(dse_status(&e), e),
        }
    })
}

fn fits(fmt: FpFormat, xs: &[u32]) -> bool {
    xs.iter().all(|x| x & !fmt.mask() == 0)
}

/// One correctly rounded operation on raw encodings.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tp_fp_op(op: TpFpOp, fmt: TpFormat, a: u32, b: u32, out: *mut u32) -> TpStatus {
    guard(|| {
        if out.is_null() {
            return fail(TpStatus::NullPointer, "out is null");
        }
        let f = fmt.into();
        if !fits(f, &[a, b]) {
            return fail(TpStatus::InvalidArgument, format!("operand does not fit {f}"));
        }
        *out = match op {
            TpFpOp::Add => soft::add(f, a, b),
            TpFpOp::Sub => soft::sub(f, a, b),
            TpFpOp::Mul => soft::mul(f, a, b),
            TpFpOp::Div => soft::div(f, a, b),
        };
        TpStatus::Ok
    })
}

/// Fused a*b+c with a single rounding.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tp_fp_fma(fmt: TpFormat, a: u32, b: u32, c: u32, out: *mut u32) -> TpStatus {
    guard(|| {
        if out.is_null() {
            return fail(TpStatus::NullPointer, "out is null");
        }
        let f = fmt.into();
        if !fits(f, &[a, b, c]) {
            return fail(TpStatus::InvalidArgument, format!("operand does not fit {f}"));
        }
        *out = soft::fma(f, a, b, c);
        TpStatus::Ok
    })
}

/// Convert an encoding of `src` to `dst`, rounding to nearest even.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tp_fp_convert(src: TpFormat, a: u32, dst: TpFormat, out: *mut u32) -> TpStatus {
    guard(|| {
        if out.is_null() {
            return fail(TpStatus::NullPointer, "out is null");
        }
        let s = src.into();
        if !fits(s, &[a]) {
            return fail(TpStatus::InvalidArgument, format!("operand does not fit {s}"));
        }
        *out = soft::convert(s, a, dst.into());
        TpStatus::Ok
    })
}

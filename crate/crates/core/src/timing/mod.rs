//! Cycle-level timing model of the cluster.

use std::fmt;
use std::io;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::isa::Diagnostic;
use crate::tpfloat::FpFormat;

mod sim;

pub use sim::simulate;

/// Default L2 access latency in core cycles.
pub const L2_LATENCY: u32 = 15;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("cluster needs at least one core and one FPU")]
    Empty,
    #[error("{cores} cores cannot be shared evenly among {fpus} FPUs")]
    UnevenSharing { cores: usize, fpus: usize },
    #[error("pipeline depth {0} not supported (0, 1 or 2)")]
    Stages(u8),
    #[error("TCDM bank count {0} is not a power of two")]
    Banks(usize),
    #[error("malformed configuration id `{0}` (expected e.g. 16c8f1p)")]
    BadId(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClusterConfig {
    pub n_cores: usize,
    pub n_fpus: usize,
    pub pipeline_stages: u8,
    pub n_tcdm_banks: usize,
    pub l2_latency_cycles: u32,
    pub tcdm_bytes: u32,
}

impl ClusterConfig {
    /// Configuration with default memory parameters. Any core/FPU pair
    /// with an even sharing is accepted, not only the canonical ones, so
    /// single-core baselines can be simulated.
    pub fn new(n_cores: usize, n_fpus: usize, pipeline_stages: u8) -> Result<Self, ConfigError> {
        let cfg = ClusterConfig {
            n_cores,
            n_fpus,
            pipeline_stages,
            n_tcdm_banks: (2 * n_cores).next_power_of_two(),
            l2_latency_cycles: L2_LATENCY,
            tcdm_bytes: if n_cores > 8 { 128 << 10 } else { 64 << 10 },
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if self.n_cores == 0 || self.n_fpus == 0 {
            return Err(ConfigError::Empty);
        }
        if self.n_cores % self.n_fpus != 0 {
            return Err(ConfigError::UnevenSharing { cores: self.n_cores, fpus: self.n_fpus });
        }
        if self.pipeline_stages > 2 {
            return Err(ConfigError::Stages(self.pipeline_stages));
        }
        if !self.n_tcdm_banks.is_power_of_two() {
            return Err(ConfigError::Banks(self.n_tcdm_banks));
        }
        Ok(())
    }

    /// The 18 design points: {8,16} cores x {1/4,1/2,1/1} sharing x {0,1,2} stages.
    pub fn canonical() -> Vec<ClusterConfig> {
        let mut out = Vec::with_capacity(18);
        for cores in [8, 16] {
            for div in [4, 2, 1] {
                for stages in 0..=2 {
                    out.push(ClusterConfig::new(cores, cores / div, stages).expect("canonical config"));
                }
            }
        }
        out
    }

    pub fn is_canonical(&self) -> bool {
        Self::canonical().contains(self)
    }

    /// Compact id such as `16c8f1p`.
    pub fn id(&self) -> String {
        format!("{}c{}f{}p", self.n_cores, self.n_fpus, self.pipeline_stages)
    }

    /// FPUs per core.
    pub fn sharing(&self) -> f64 {
        self.n_fpus as f64 / self.n_cores as f64
    }

    /// FP result latency in cycles for pipelined operations.
    pub fn fp_latency(&self) -> u64 {
        self.pipeline_stages as u64 + 1
    }
}

impl fmt::Display for ClusterConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for ClusterConfig {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let bad = || ConfigError::BadId(s.to_string());
        let (cores, rest) = s.split_once('c').ok_or_else(bad)?;
        let (fpus, rest) = rest.split_once('f').ok_or_else(bad)?;
        let stages = rest.strip_suffix('p').ok_or_else(bad)?;
        ClusterConfig::new(
            cores.parse().map_err(|_| bad())?,
            fpus.parse().map_err(|_| bad())?,
            stages.parse().map_err(|_| bad())?,
        )
    }
}

/// Static interleaved assignment of cores to FPUs.
pub fn fpu_map(core_id: usize, n_cores: usize, n_fpus: usize) -> usize {
    debug_assert!(core_id < n_cores);
    core_id % n_fpus
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("address {0:#x} is not word aligned")]
pub struct UnalignedAddress(pub u32);

/// Word-interleaved bank of a TCDM address.
pub fn tcdm_bank(addr: u32, n_banks: usize) -> Result<usize, UnalignedAddress> {
    if addr % 4 != 0 {
        return Err(UnalignedAddress(addr));
    }
    Ok((addr / 4) as usize % n_banks)
}

/// Round-robin choice: the first requester strictly after `last_grant` in
/// cyclic id order. `requesters` must be non-empty.
pub fn arbitrate(requesters: &[usize], last_grant: usize) -> usize {
    let after = requesters.iter().copied().filter(|&r| r > last_grant).min();
    after.or_else(|| requesters.iter().copied().min()).expect("arbitrate needs a requester")
}

/// Occupancy of the shared divide/square-root unit.
pub fn divsqrt_cycles(fmt: FpFormat) -> u64 {
    match fmt {
        FpFormat::F32 => 11,
        FpFormat::F16 => 7,
        FpFormat::BF16 => 6,
    }
}

/// Per-core cycle accounting. Cycles not in any field were spent idle
/// (clock-gated at a barrier or after finishing).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub total: u64,
    pub active: u64,
    pub tcdm_contention: u64,
    pub l2_stall: u64,
    pub fpu_stall: u64,
    pub fpu_contention: u64,
    pub fpu_wb_stall: u64,
    pub icache_miss: u64,
}

impl Counters {
    pub fn stalls(&self) -> u64 {
        self.tcdm_contention + self.l2_stall + self.fpu_stall + self.fpu_contention + self.fpu_wb_stall + self.icache_miss
    }

    pub fn idle(&self) -> u64 {
        self.total - self.active - self.stalls()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimResult {
    pub elapsed_cycles: u64,
    pub per_core: Vec<Counters>,
    pub total_flops: u64,
}

impl SimResult {
    pub fn sum(&self) -> Counters {
        self.per_core.iter().fold(Counters::default(), |a, c| Counters {
            total: a.total + c.total,
            active: a.active + c.active,
            tcdm_contention: a.tcdm_contention + c.tcdm_contention,
            l2_stall: a.l2_stall + c.l2_stall,
            fpu_stall: a.fpu_stall + c.fpu_stall,
            fpu_contention: a.fpu_contention + c.fpu_contention,
            fpu_wb_stall: a.fpu_wb_stall + c.fpu_wb_stall,
            icache_miss: a.icache_miss + c.icache_miss,
        })
    }
}

/// Counter rows in core order under a header naming the fields.
pub fn write_counters_csv<W: io::Write>(out: W, per_core: &[Counters]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in per_core {
        w.serialize(c)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("expected {expected} programs (one per core), got {found}")]
    ProgramCount { expected: usize, found: usize },
    #[error("program {index} is tagged for core {core_id}")]
    CoreMismatch { index: usize, core_id: usize },
    #[error("core {core}: {diag}")]
    Invalid { core: usize, diag: Diagnostic },
    #[error("core {core}: {source}")]
    Unaligned { core: usize, source: UnalignedAddress },
    #[error("inconsistent barrier sequence at barrier {id} (core {core})")]
    Barrier { id: u32, core: usize },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fpu_map_examples() {
        assert_eq!(fpu_map(4, 8, 4), 0);
        assert_eq!(fpu_map(3, 8, 8), 3);
        assert_eq!(fpu_map(9, 16, 4), 1);
    }

    #[test]
    fn fpu_map_pairs_cores_by_stride() {
        let shared: Vec<usize> = (0..8).filter(|&c| fpu_map(c, 8, 4) == 1).collect();
        assert_eq!(shared, [1, 5]);
    }

    #[test]
    fn tcdm_bank_examples() {
        assert_eq!(tcdm_bank(0, 16), Ok(0));
        assert_eq!(tcdm_bank(4, 16), Ok(1));
        assert_eq!(tcdm_bank(68, 16), Ok(1));
        assert_eq!(tcdm_bank(6, 16), Err(UnalignedAddress(6)));
    }

    #[test]
    fn arbitrate_examples() {
        assert_eq!(arbitrate(&[0, 4], 0), 4);
        assert_eq!(arbitrate(&[2], 7), 2);
        assert_eq!(arbitrate(&[0, 4], 4), 0);
        assert_eq!(arbitrate(&[1, 3, 6], 3), 6);
    }

    #[test]
    fn round_robin_alternates_under_saturation() {
        let mut last = 1;
        let mut grants = [0u32; 2];
        for _ in 0..1000 {
            last = arbitrate(&[0, 1], last);
            grants[last] += 1;
        }
        assert_eq!(grants, [500, 500]);
    }

    #[test]
    fn canonical_set() {
        let all = ClusterConfig::canonical();
        assert_eq!(all.len(), 18);
        let ids: Vec<String> = all.iter().map(ClusterConfig::id).collect();
        assert!(ids.contains(&"8c2f0p".to_string()));
        assert!(ids.contains(&"16c16f2p".to_string()));
        for c in &all {
            assert_eq!(c.n_tcdm_banks, 2 * c.n_cores);
            assert_eq!(c.id().parse::<ClusterConfig>().unwrap(), *c);
        }
        assert_eq!(all[0].tcdm_bytes, 64 << 10);
        assert_eq!(all[17].tcdm_bytes, 128 << 10);
    }

    #[test]
    fn config_rejections() {
        assert_eq!(ClusterConfig::new(8, 3, 1), Err(ConfigError::UnevenSharing { cores: 8, fpus: 3 }));
        assert_eq!(ClusterConfig::new(8, 8, 3), Err(ConfigError::Stages(3)));
        assert!(matches!("16x4f1p".parse::<ClusterConfig>(), Err(ConfigError::BadId(_))));
        assert!(ClusterConfig::new(1, 1, 0).is_ok());
    }

    #[test]
    fn csv_header_follows_field_order() {
        let mut buf = Vec::new();
        let c = Counters { total: 9, active: 5, fpu_stall: 1, ..Default::default() };
        write_counters_csv(&mut buf, &[c]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "total,active,tcdm_contention,l2_stall,fpu_stall,fpu_contention,fpu_wb_stall,icache_miss\n9,5,0,0,1,0,0,0\n"
        );
        assert_eq!(c.idle(), 3);
    }
}

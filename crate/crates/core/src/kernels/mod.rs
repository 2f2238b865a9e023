//! The benchmark kernels: per-core instruction streams for the timing
//! model and bit-exact functional references with an `f64` oracle.

use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::isa::Program;
use crate::tpfloat::{soft, FpFormat};

mod arith;
mod conv;
mod dwt;
mod emit;
mod fft;
mod fir;
mod iir;
mod kmeans;
mod matmul;
mod svm;

use arith::{Arith, Exact, Soft};

pub use fft::fft_radix2_dif;
pub use iir::{iir_block_form, BlockForm};

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),
    #[error("unknown variant `{0}` (scalar, f16 or bf16)")]
    UnknownVariant(String),
    #[error("invalid size: {0}")]
    Size(String),
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("recursive coefficients describe an unstable or degenerate filter")]
    UnstableFilter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Benchmark {
    Conv,
    Dwt,
    Fft,
    Fir,
    Iir,
    Kmeans,
    Matmul,
    Svm,
}

impl Benchmark {
    pub const ALL: [Benchmark; 8] = [
        Benchmark::Conv,
        Benchmark::Dwt,
        Benchmark::Fft,
        Benchmark::Fir,
        Benchmark::Iir,
        Benchmark::Kmeans,
        Benchmark::Matmul,
        Benchmark::Svm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Conv => "conv",
            Benchmark::Dwt => "dwt",
            Benchmark::Fft => "fft",
            Benchmark::Fir => "fir",
            Benchmark::Iir => "iir",
            Benchmark::Kmeans => "kmeans",
            Benchmark::Matmul => "matmul",
            Benchmark::Svm => "svm",
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, KernelError> {
        let lower = s.to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|b| b.name() == lower)
            .ok_or_else(|| KernelError::UnknownBenchmark(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// binary32 scalars.
    Scalar,
    /// Two binary16 lanes per word.
    F16,
    /// Two bfloat16 lanes per word.
    Bf16,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Scalar, Variant::F16, Variant::Bf16];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Scalar => "scalar",
            Variant::F16 => "f16",
            Variant::Bf16 => "bf16",
        }
    }

    /// Storage format of data elements.
    pub fn format(self) -> FpFormat {
        match self {
            Variant::Scalar => FpFormat::F32,
            Variant::F16 => FpFormat::F16,
            Variant::Bf16 => FpFormat::BF16,
        }
    }

    pub fn is_vector(self) -> bool {
        self != Variant::Scalar
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, KernelError> {
        match s.to_ascii_lowercase().as_str() {
            "scalar" | "f32" => Ok(Variant::Scalar),
            "f16" | "vector_f16" => Ok(Variant::F16),
            "bf16" | "vector_bf16" => Ok(Variant::Bf16),
            _ => Err(KernelError::UnknownVariant(s.to_string())),
        }
    }
}

/// Problem dimensions. Each benchmark reads only the fields it needs:
///
/// | benchmark | `size`            | other fields                    |
/// |-----------|-------------------|---------------------------------|
/// | conv      | image side        | `taps` = kernel side            |
/// | dwt       | signal length     | `levels`                        |
/// | fft       | points            |                                 |
/// | fir       | output samples    | `taps`                          |
/// | iir       | output samples    | `taps` = filter order           |
/// | kmeans    | points            | `dim`, `clusters`, `iters`      |
/// | matmul    | M = N = K         |                                 |
/// | svm       | samples           | `dim`, `support_vectors`        |
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims {
    pub size: usize,
    pub taps: usize,
    pub dim: usize,
    pub clusters: usize,
    pub levels: usize,
    pub iters: usize,
    pub support_vectors: usize,
}

impl Dims {
    pub fn default_for(b: Benchmark) -> Dims {
        let base = Dims { size: 0, taps: 0, dim: 0, clusters: 0, levels: 0, iters: 0, support_vectors: 0 };
        match b {
            Benchmark::Conv => Dims { size: 32, taps: 5, ..base },
            Benchmark::Dwt => Dims { size: 512, levels: 3, ..base },
            Benchmark::Fft => Dims { size: 256, ..base },
            Benchmark::Fir => Dims { size: 1024, taps: 16, ..base },
            Benchmark::Iir => Dims { size: 512, taps: 8, ..base },
            Benchmark::Kmeans => Dims { size: 256, dim: 8, clusters: 4, iters: 2, ..base },
            Benchmark::Matmul => Dims { size: 32, ..base },
            Benchmark::Svm => Dims { size: 32, dim: 32, support_vectors: 16, ..base },
        }
    }
}

pub const DEFAULT_SEED: u64 = 0x5EED_0F_C1_05_7E_12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct KernelSpec {
    pub benchmark: Benchmark,
    pub variant: Variant,
    pub n_cores: usize,
    pub dims: Dims,
    pub seed: u64,
}

impl KernelSpec {
    /// Default dimensions and seed.
    pub fn new(benchmark: Benchmark, variant: Variant, n_cores: usize) -> Self {
        KernelSpec { benchmark, variant, n_cores, dims: Dims::default_for(benchmark), seed: DEFAULT_SEED }
    }

    pub fn with_dims(mut self, dims: Dims) -> Self {
        self.dims = dims;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn check(&self) -> Result<(), KernelError> {
        let d = &self.dims;
        let need = |ok: bool, what: &str| if ok { Ok(()) } else { Err(KernelError::Size(what.to_string())) };
        need(self.n_cores >= 1, "at least one core")?;
        need(d.size >= 1, "size must be positive")?;
        match self.benchmark {
            Benchmark::Conv => need(d.taps >= 1 && d.taps <= d.size, "kernel side must be in 1..=size"),
            Benchmark::Fir | Benchmark::Iir => need(d.taps >= 1, "taps must be positive"),
            Benchmark::Dwt => need(d.levels >= 1 && d.size >> d.levels >= 2, "size must allow the requested levels"),
            Benchmark::Kmeans => need(d.dim >= 1 && d.clusters >= 1 && d.iters >= 1, "dim, clusters and iters must be positive"),
            Benchmark::Svm => need(d.dim >= 1 && d.support_vectors >= 1, "dim and support vectors must be positive"),
            Benchmark::Fft | Benchmark::Matmul => Ok(()),
        }
    }
}

/// Named input arrays, already rounded to the formats the kernel reads
/// them in.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KernelData {
    pub arrays: Vec<(String, Vec<f64>)>,
}

impl KernelData {
    pub(crate) fn push(&mut self, name: &str, values: Vec<f64>) {
        self.arrays.push((name.to_string(), values));
    }

    pub fn get(&self, name: &str) -> &[f64] {
        &self.arrays.iter().find(|(n, _)| n == name).unwrap_or_else(|| panic!("no input array `{name}`")).1
    }
}

#[derive(Clone, Debug)]
pub struct KernelBuild {
    pub spec: KernelSpec,
    pub programs: Vec<Program>,
    /// Useful floating-point operations (FMA = 2, padding excluded).
    pub flops: u64,
    pub data: KernelData,
    /// TCDM footprint in bytes.
    pub tcdm_bytes: u32,
}

/// Functional outputs and their error against the `f64` oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub outputs: Vec<f64>,
    pub oracle: Vec<f64>,
    /// max |out - oracle| / max |oracle| (absolute error if the oracle is all zero).
    pub max_rel_error: f64,
}

pub(crate) fn rng(spec: &KernelSpec) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(spec.seed ^ (spec.benchmark as u64) << 48)
}

/// Uniform values in `[-amp, amp]` rounded to `fmt`.
pub(crate) fn uniform(rng: &mut ChaCha8Rng, n: usize, amp: f64, fmt: FpFormat) -> Vec<f64> {
    (0..n).map(|_| quantize(fmt, rng.random_range(-amp..=amp))).collect()
}

pub(crate) fn quantize(fmt: FpFormat, x: f64) -> f64 {
    soft::to_f64(fmt, soft::from_f64(fmt, x))
}

/// Generate inputs, instruction streams and flop count.
pub fn build(spec: &KernelSpec) -> Result<KernelBuild, KernelError> {
    spec.check()?;
    let (data, programs, tcdm_bytes) = match spec.benchmark {
        Benchmark::Conv => conv::build(spec),
        Benchmark::Dwt => dwt::build(spec),
        Benchmark::Fft => fft::build(spec)?,
        Benchmark::Fir => fir::build(spec),
        Benchmark::Iir => iir::build(spec)?,
        Benchmark::Kmeans => kmeans::build(spec),
        Benchmark::Matmul => matmul::build(spec),
        Benchmark::Svm => svm::build(spec),
    };
    let flops = programs.iter().map(|p| p.flops).sum();
    debug_assert_eq!(flops, analytic_flops(spec));
    Ok(KernelBuild { spec: *spec, programs, flops, data, tcdm_bytes })
}

/// Closed-form useful flop count of a kernel.
pub fn analytic_flops(spec: &KernelSpec) -> u64 {
    let d = &spec.dims;
    let u = |x: usize| x as u64;
    match spec.benchmark {
        Benchmark::Conv => {
            let out = u(d.size - d.taps + 1);
            2 * out * out * u(d.taps * d.taps)
        }
        Benchmark::Dwt => {
            let n0 = dwt::padded_len(d.size, d.levels);
            (0..d.levels).map(|l| 16 * u(n0 >> (l + 1))).sum()
        }
        Benchmark::Fft => {
            let n = d.size.next_power_of_two();
            5 * u(n) * u(n.trailing_zeros() as usize)
        }
        Benchmark::Fir => 2 * u(d.size) * u(d.taps),
        Benchmark::Iir => 2 * u(d.size) * u(2 * d.taps + 1),
        Benchmark::Kmeans => u(d.iters) * (3 * u(d.size * d.clusters * d.dim) + u(d.size * d.dim) + u(d.clusters * d.dim)),
        Benchmark::Matmul => 2 * u(d.size).pow(3),
        Benchmark::Svm => 2 * u(d.size * d.support_vectors) * u(d.dim + 1),
    }
}

fn compute<A: Arith>(a: &A, b: &KernelBuild) -> Vec<f64> {
    let spec = &b.spec;
    match spec.benchmark {
        Benchmark::Conv => conv::compute(a, spec, &b.data),
        Benchmark::Dwt => dwt::compute(a, spec, &b.data),
        Benchmark::Fft => fft::compute(a, spec, &b.data),
        Benchmark::Fir => fir::compute(a, spec, &b.data),
        Benchmark::Iir => iir::compute(a, spec, &b.data),
        Benchmark::Kmeans => kmeans::compute(a, spec, &b.data).0,
        Benchmark::Matmul => matmul::compute(a, spec, &b.data),
        Benchmark::Svm => svm::compute(a, spec, &b.data),
    }
}

/// Evaluate the kernel with the variant's arithmetic and with the `f64`
/// oracle following the same algorithm and operation order.
pub fn run_reference(build: &KernelBuild) -> Reference {
    let outputs = compute(&Soft { fmt: build.spec.variant.format() }, build);
    let oracle = compute(&Exact, build);
    let max_rel_error = relative_error(&outputs, &oracle);
    Reference { outputs, oracle, max_rel_error }
}

/// Normwise relative error of `got` against `want`.
pub fn relative_error(got: &[f64], want: &[f64]) -> f64 {
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = got.iter().zip(want).fold(0.0f64, |m, (g, w)| m.max((g - w).abs()));
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

/// Write output values as `index,value` CSV rows (values round-trip exactly).
pub fn write_golden<W: io::Write>(out: W, values: &[f64]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "value"])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), format!("{v:?}")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_golden(path: &Path) -> csv::Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v = rec.get(1).unwrap_or("").parse::<f64>().map_err(|e| {
            csv::Error::from(io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
        })?;
        out.push(v);
    }
    Ok(out)
}

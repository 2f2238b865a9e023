//! Conformance checks of a datapath against the reference arithmetic.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::format::FpFormat;
use super::{reference, soft};

/// The operations a datapath must provide. Defaults forward to the
/// production implementation.
pub trait Datapath: Sync {
    fn add(&self, f: FpFormat, a: u32, b: u32) -> u32 {
        soft::add(f, a, b)
    }
    fn sub(&self, f: FpFormat, a: u32, b: u32) -> u32 {
        soft::sub(f, a, b)
    }
    fn mul(&self, f: FpFormat, a: u32, b: u32) -> u32 {
        soft::mul(f, a, b)
    }
    fn fma(&self, f: FpFormat, a: u32, b: u32, c: u32) -> u32 {
        soft::fma(f, a, b, c)
    }
    fn div(&self, f: FpFormat, a: u32, b: u32) -> u32 {
        soft::div(f, a, b)
    }
    fn sqrt(&self, f: FpFormat, a: u32) -> u32 {
        soft::sqrt(f, a)
    }
    fn convert(&self, src: FpFormat, a: u32, dst: FpFormat) -> u32 {
        soft::convert(src, a, dst)
    }
}

/// The shipped datapath.
pub struct Production;
impl Datapath for Production {}

/// A datapath with a deliberate last-bit rounding error in `add`, used to
/// exercise the failure path of the checker.
pub struct FaultInjected;
impl Datapath for FaultInjected {
    fn add(&self, f: FpFormat, a: u32, b: u32) -> u32 {
        let r = soft::add(f, a, b);
        if (a ^ b) & 0x7 == 0x3 && !f.is_nan(r) && r & !f.sign_mask() != 0 {
            r ^ 1
        } else {
            r
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VerifyOp {
    Convert,
    Add,
    Sub,
    Mul,
    Fma,
    Div,
    Sqrt,
}

impl VerifyOp {
    pub const ARITH: [VerifyOp; 6] =
        [VerifyOp::Add, VerifyOp::Sub, VerifyOp::Mul, VerifyOp::Fma, VerifyOp::Div, VerifyOp::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            VerifyOp::Convert => "convert",
            VerifyOp::Add => "add",
            VerifyOp::Sub => "sub",
            VerifyOp::Mul => "mul",
            VerifyOp::Fma => "fma",
            VerifyOp::Div => "div",
            VerifyOp::Sqrt => "sqrt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [VerifyOp::Convert]
            .into_iter()
            .chain(Self::ARITH)
            .find(|op| op.name() == s)
    }
}

/// A single disagreement between datapath and reference.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub op: &'static str,
    pub format: FpFormat,
    pub inputs: Vec<u32>,
    pub got: u32,
    pub expected: u32,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.op, self.format)?;
        for x in &self.inputs {
            write!(f, " {x:#010x}")?;
        }
        write!(f, " -> got {:#010x}, expected {:#010x}", self.got, self.expected)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    pub checked: u64,
    pub mismatches: u64,
    pub first: Option<Mismatch>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }

    fn record(&mut self, m: Mismatch) {
        self.mismatches += 1;
        if self.first.is_none() {
            self.first = Some(m);
        }
    }

    /// Merge `other`, which covers cases after the ones in `self`.
    pub fn merge(mut self, other: Report) -> Report {
        self.checked += other.checked;
        self.mismatches += other.mismatches;
        if self.first.is_none() {
            self.first = other.first;
        }
        self
    }
}

/// Every 16-bit pattern of `fmt` widened to binary32 and narrowed back,
/// both directions checked against the reference, and the round trip
/// required to be the identity on non-NaN patterns.
pub fn check_conversions_exhaustive(dp: &dyn Datapath, fmt: FpFormat) -> Report {
    assert!(fmt.is_16bit());
    let chunks: Vec<Report> = (0u32..16)
        .into_par_iter()
        .map(|chunk| {
            let mut rep = Report::default();
            for v in chunk << 12..(chunk + 1) << 12 {
                rep.checked += 1;
                let wide = dp.convert(fmt, v, FpFormat::F32);
                let want = reference::convert(fmt, v, FpFormat::F32);
                if wide != want {
                    rep.record(Mismatch { op: "widen", format: fmt, inputs: vec![v], got: wide, expected: want });
                    continue;
                }
                let back = dp.convert(FpFormat::F32, wide, fmt);
                let want_back = reference::convert(FpFormat::F32, wide, fmt);
                let identity = if fmt.is_nan(v) { fmt.canonical_nan() } else { v };
                if back != want_back || back != identity {
                    rep.record(Mismatch { op: "narrow", format: fmt, inputs: vec![wide], got: back, expected: want_back });
                }
            }
            rep
        })
        .collect();
    chunks.into_iter().fold(Report::default(), Report::merge)
}

/// Draw an operand biased towards the interesting corners of the format.
pub fn sample_operand(fmt: FpFormat, rng: &mut impl Rng) -> u32 {
    let frac_bits = fmt.sig_bits_stored();
    let sign = if rng.random::<bool>() { fmt.sign_mask() } else { 0 };
    match rng.random_range(0..10) {
        0..=4 => rng.random::<u32>() & fmt.mask(),
        5 => {
            let specials = [
                0,
                fmt.infinity(false),
                fmt.canonical_nan(),
                1,
                fmt.frac_mask(),
                1 << frac_bits,
                fmt.infinity(false) - 1,
                soft::from_f64(fmt, 1.0),
            ];
            sign | specials[rng.random_range(0..specials.len())]
        }
        6 => sign | (rng.random::<u32>() & fmt.frac_mask()),
        _ => {
            // moderate exponents so products and sums stay in range
            let bias = fmt.bias() as u32;
            let span = bias.min(12);
            let e = rng.random_range(bias - span..=bias + span);
            sign | e << frac_bits | (rng.random::<u32>() & fmt.frac_mask())
        }
    }
}

/// Near-cancellation partner for `a`: opposite sign, same binade.
fn partner(fmt: FpFormat, a: u32, rng: &mut impl Rng) -> u32 {
    let flip = rng.random_range(0..8u32);
    (a ^ fmt.sign_mask() ^ flip) & fmt.mask()
}

fn sampled_chunk(dp: &dyn Datapath, op: VerifyOp, fmt: FpFormat, n: u64, seed: u64) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = Report::default();
    for _ in 0..n {
        let a = sample_operand(fmt, &mut rng);
        let mut b = sample_operand(fmt, &mut rng);
        let mut c = sample_operand(fmt, &mut rng);
        if rng.random_range(0..4) == 0 {
            b = partner(fmt, a, &mut rng);
            c = partner(fmt, soft::mul(fmt, a, b), &mut rng);
        }
        let (got, expected, inputs) = match op {
            VerifyOp::Add => (dp.add(fmt, a, b), reference::add(fmt, a, b), vec![a, b]),
            VerifyOp::Sub => (dp.sub(fmt, a, b), reference::sub(fmt, a, b), vec![a, b]),
            VerifyOp::Mul => (dp.mul(fmt, a, b), reference::mul(fmt, a, b), vec![a, b]),
            VerifyOp::Fma => (dp.fma(fmt, a, b, c), reference::fma(fmt, a, b, c), vec![a, b, c]),
            VerifyOp::Div => (dp.div(fmt, a, b), reference::div(fmt, a, b), vec![a, b]),
            VerifyOp::Sqrt => (dp.sqrt(fmt, a), reference::sqrt(fmt, a), vec![a]),
            VerifyOp::Convert => {
                // narrowing from binary32 into `fmt` (or f32 -> f16 for f32)
                let dst = if fmt == FpFormat::F32 { FpFormat::F16 } else { fmt };
                let w = sample_operand(FpFormat::F32, &mut rng);
                (dp.convert(FpFormat::F32, w, dst), reference::convert(FpFormat::F32, w, dst), vec![w])
            }
        };
        rep.checked += 1;
        if got != expected {
            rep.record(Mismatch { op: op.name(), format: fmt, inputs, got, expected });
        }
    }
    rep
}

/// Square root of every 16-bit pattern of `fmt`.
pub fn check_sqrt_exhaustive(dp: &dyn Datapath, fmt: FpFormat) -> Report {
    assert!(fmt.is_16bit());
    let mut rep = Report::default();
    for a in 0..=0xffff {
        rep.checked += 1;
        let (got, expected) = (dp.sqrt(fmt, a), reference::sqrt(fmt, a));
        if got != expected {
            rep.record(Mismatch { op: "sqrt", format: fmt, inputs: vec![a], got, expected });
        }
    }
    rep
}

/// `n` random cases of `op` in `fmt`, split deterministically into chunks
/// that run in parallel.
pub fn check_sampled(dp: &dyn Datapath, op: VerifyOp, fmt: FpFormat, n: u64, seed: u64) -> Report {
    const CHUNK: u64 = 1 << 14;
    let chunks = n.div_ceil(CHUNK);
    let reports: Vec<Report> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let len = CHUNK.min(n - i * CHUNK);
            let chunk_seed = seed ^ (i + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (op as u64) << 56 ^ (fmt as u64) << 60;
            sampled_chunk(dp, op, fmt, len, chunk_seed)
        })
        .collect();
    reports.into_iter().fold(Report::default(), Report::merge)
}

/// Widening FMA against convert-then-binary32-FMA on `n` random triples.
pub fn check_widening(fmt: FpFormat, n: u64, seed: u64) -> Report {
    assert!(fmt.is_16bit());
    const CHUNK: u64 = 1 << 16;
    let chunks = n.div_ceil(CHUNK);
    let reports: Vec<Report> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i + 1).wrapping_mul(0xD1B5_4A32_D192_ED03));
            let mut rep = Report::default();
            for _ in 0..CHUNK.min(n - i * CHUNK) {
                let a = sample_operand(fmt, &mut rng);
                let b = sample_operand(fmt, &mut rng);
                let c = sample_operand(FpFormat::F32, &mut rng);
                let got = soft::fma_widen(fmt, a, b, c);
                let wa = soft::convert(fmt, a, FpFormat::F32);
                let wb = soft::convert(fmt, b, FpFormat::F32);
                let expected = soft::fma(FpFormat::F32, wa, wb, c);
                rep.checked += 1;
                if got != expected {
                    rep.record(Mismatch { op: "fma_widen", format: fmt, inputs: vec![a, b, c], got, expected });
                }
            }
            rep
        })
        .collect();
    reports.into_iter().fold(Report::default(), Report::merge)
}

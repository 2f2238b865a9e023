//! Per-core instruction stream construction.

use crate::isa::{FpOpKind, Instr, InstrKind, Program, Reg, Region};
use crate::tpfloat::{DivSqrtOp, FpFormat};

pub(crate) const TCDM_BASE: u32 = 0x1000_0000;

/// A word array in TCDM.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Array {
    base: u32,
}

impl Array {
    pub fn at(&self, i: usize) -> u32 {
        self.base + 4 * i as u32
    }
}

/// Bump allocator over the TCDM address space.
pub(crate) struct Layout {
    next: u32,
}

impl Layout {
    pub fn new() -> Self {
        Layout { next: TCDM_BASE }
    }

    pub fn alloc(&mut self, words: usize) -> Array {
        let a = Array { base: self.next };
        self.next += 4 * words as u32;
        a
    }

    /// One copy of a `words` array per core, each starting two banks after
    /// the previous one.
    pub fn alloc_copies(&mut self, words: usize, copies: usize) -> Vec<Array> {
        let stride = words.next_multiple_of(32) + 2;
        let all = self.alloc(stride * copies);
        (0..copies).map(|c| Array { base: all.base + 4 * (stride * c) as u32 }).collect()
    }

    pub fn bytes(&self) -> u32 {
        self.next - TCDM_BASE
    }
}

pub(crate) struct Emitter {
    core: usize,
    instrs: Vec<Instr>,
    next: u32,
    flops: u64,
    /// Storage format of packed operations.
    vfmt: FpFormat,
    counter: Option<Reg>,
    debt: f64,
}

impl Emitter {
    pub fn new(core: usize, vfmt: FpFormat) -> Self {
        Emitter { core, instrs: Vec::new(), next: 0, flops: 0, vfmt, counter: None, debt: 0.0 }
    }

    fn push(&mut self, kind: InstrKind, dst: bool, srcs: &[Reg]) -> Reg {
        let r = Reg(self.next);
        self.next += u32::from(dst);
        self.instrs.push(Instr::new(kind, dst.then_some(r), srcs.to_vec()));
        r
    }

    pub fn int(&mut self, srcs: &[Reg]) -> Reg {
        self.push(InstrKind::IntOp, true, srcs)
    }

    pub fn ld(&mut self, addr: u32) -> Reg {
        self.push(InstrKind::Load { region: Region::Tcdm, addr }, true, &[])
    }

    pub fn st(&mut self, addr: u32, v: Reg) {
        self.push(InstrKind::Store { region: Region::Tcdm, addr }, false, &[v]);
    }

    /// Binary32 scalar operation.
    pub fn sfp(&mut self, op: FpOpKind, srcs: &[Reg]) -> Reg {
        self.push(InstrKind::FpOp { op, fmt: FpFormat::F32, vectorial: false }, true, srcs)
    }

    /// Packed operation on the storage format.
    pub fn vfp(&mut self, op: FpOpKind, srcs: &[Reg]) -> Reg {
        self.push(InstrKind::FpOp { op, fmt: self.vfmt, vectorial: true }, true, srcs)
    }

    pub fn divsqrt(&mut self, op: DivSqrtOp, fmt: FpFormat, srcs: &[Reg]) -> Reg {
        self.push(InstrKind::FpDivSqrt { op, fmt }, true, srcs)
    }

    pub fn barrier(&mut self, id: u32) {
        self.instrs.push(Instr::barrier(id));
    }

    pub fn flops(&mut self, n: u64) {
        self.flops += n;
    }

    /// Loop and address bookkeeping: `amount` integer instructions on
    /// average, carried over between calls, chained on a counter register.
    pub fn bookkeeping(&mut self, amount: f64) {
        self.debt += amount;
        while self.debt >= 1.0 - 1e-9 {
            self.debt -= 1.0;
            let srcs: Vec<Reg> = self.counter.into_iter().collect();
            self.counter = Some(self.int(&srcs));
        }
    }

    pub fn finish(mut self) -> Program {
        self.instrs.push(Instr::end());
        Program::new(self.core, self.instrs, self.flops)
    }
}

/// Contiguous static chunk of `n` iterations for `core` out of `cores`.
pub(crate) fn chunk(n: usize, cores: usize, core: usize) -> std::ops::Range<usize> {
    let per = n.div_ceil(cores);
    let lo = (core * per).min(n);
    lo..((core + 1) * per).min(n)
}

/// The iterations of `chunk` in rotated order, starting `core * skew`
/// iterations in, so that cores running in lockstep touch different banks.
pub(crate) fn skewed_chunk(n: usize, cores: usize, core: usize, skew: usize) -> impl Iterator<Item = usize> {
    let r = chunk(n, cores, core);
    let len = r.len().max(1);
    let off = core * skew % len;
    r.clone().map(move |i| r.start + (i - r.start + off) % len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::validate;

    #[test]
    fn chunks_cover_exactly_once() {
        for n in [0, 1, 7, 16, 100] {
            for cores in [1, 3, 8, 16] {
                let mut seen = vec![0; n];
                for c in 0..cores {
                    for i in chunk(n, cores, c) {
                        seen[i] += 1;
                    }
                }
                assert!(seen.iter().all(|&s| s == 1));
            }
        }
    }

    #[test]
    fn skewed_chunk_is_a_rotation() {
        let mut v: Vec<usize> = skewed_chunk(40, 4, 1, 3).collect();
        assert_eq!(v[0], 13);
        v.sort();
        assert_eq!(v, (10..20).collect::<Vec<_>>());
    }

    #[test]
    fn bookkeeping_carries_fractions() {
        let mut e = Emitter::new(0, FpFormat::F16);
        for _ in 0..8 {
            e.bookkeeping(0.25);
        }
        let p = e.finish();
        assert_eq!(p.instrs.len(), 3);
        assert!(validate(&p).is_ok());
    }
}

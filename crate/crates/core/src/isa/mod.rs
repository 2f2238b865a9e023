//! Abstract per-core instruction streams.
//!
//! Kernels emit fully unrolled straight-line programs over unlimited
//! virtual registers. Instructions carry only what the timing model and the
//! dataflow checks need: an instruction class, statically known memory
//! addresses, a destination and source registers.

mod digest;
mod text;

pub use digest::dataflow_digest;
pub use text::{dump_program, parse_program, ParseError};

use std::collections::HashSet;
use std::fmt;

use crate::tpfloat::{DivSqrtOp, FpFormat};

/// Virtual register id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Reg(pub u32);

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    Tcdm,
    L2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FpOpKind {
    Add,
    Sub,
    Mul,
    Fma,
    Cmp,
    Convert,
    CastPack,
    Vadd,
    Vsub,
    Vmul,
    Vfma,
    Vfdotp,
    Shuffle,
}

impl FpOpKind {
    pub const ALL: [FpOpKind; 13] = [
        FpOpKind::Add,
        FpOpKind::Sub,
        FpOpKind::Mul,
        FpOpKind::Fma,
        FpOpKind::Cmp,
        FpOpKind::Convert,
        FpOpKind::CastPack,
        FpOpKind::Vadd,
        FpOpKind::Vsub,
        FpOpKind::Vmul,
        FpOpKind::Vfma,
        FpOpKind::Vfdotp,
        FpOpKind::Shuffle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FpOpKind::Add => "add",
            FpOpKind::Sub => "sub",
            FpOpKind::Mul => "mul",
            FpOpKind::Fma => "fma",
            FpOpKind::Cmp => "cmp",
            FpOpKind::Convert => "convert",
            FpOpKind::CastPack => "cast_pack",
            FpOpKind::Vadd => "vadd",
            FpOpKind::Vsub => "vsub",
            FpOpKind::Vmul => "vmul",
            FpOpKind::Vfma => "vfma",
            FpOpKind::Vfdotp => "vfdotp",
            FpOpKind::Shuffle => "shuffle",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Ops that only exist in packed form.
    pub fn is_packed_only(self) -> bool {
        matches!(
            self,
            FpOpKind::Vadd
                | FpOpKind::Vsub
                | FpOpKind::Vmul
                | FpOpKind::Vfma
                | FpOpKind::Vfdotp
                | FpOpKind::Shuffle
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InstrKind {
    IntOp,
    Load { region: Region, addr: u32 },
    Store { region: Region, addr: u32 },
    FpOp { op: FpOpKind, fmt: FpFormat, vectorial: bool },
    FpDivSqrt { op: DivSqrtOp, fmt: FpFormat },
    Barrier { id: u32 },
    End,
}

impl InstrKind {
    pub fn is_fp(&self) -> bool {
        matches!(self, InstrKind::FpOp { .. } | InstrKind::FpDivSqrt { .. })
    }

    pub fn is_mem(&self) -> bool {
        matches!(self, InstrKind::Load { .. } | InstrKind::Store { .. })
    }

    /// Synchronization pseudo-ops, excluded from intensity denominators.
    pub fn is_sync(&self) -> bool {
        matches!(self, InstrKind::Barrier { .. } | InstrKind::End)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Instr {
    pub kind: InstrKind,
    pub dst: Option<Reg>,
    pub srcs: Vec<Reg>,
}

impl Instr {
    pub fn new(kind: InstrKind, dst: Option<Reg>, srcs: Vec<Reg>) -> Self {
        Instr { kind, dst, srcs }
    }

    pub fn end() -> Self {
        Instr::new(InstrKind::End, None, Vec::new())
    }

    pub fn barrier(id: u32) -> Self {
        Instr::new(InstrKind::Barrier { id }, None, Vec::new())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub core_id: usize,
    pub instrs: Vec<Instr>,
    /// Useful floating-point operations performed by this core.
    pub flops: u64,
}

impl Program {
    pub fn new(core_id: usize, instrs: Vec<Instr>, flops: u64) -> Self {
        Program { core_id, instrs, flops }
    }

    /// Barrier ids in program order.
    pub fn barrier_ids(&self) -> Vec<u32> {
        self.instrs
            .iter()
            .filter_map(|i| match i.kind {
                InstrKind::Barrier { id } => Some(id),
                _ => None,
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    DefBeforeUse,
    Redefinition,
    EndPlacement,
    VectorFormat,
    UnalignedAddress,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::DefBeforeUse => "def-before-use",
            Rule::Redefinition => "register redefined",
            Rule::EndPlacement => "end placement",
            Rule::VectorFormat => "format rule",
            Rule::UnalignedAddress => "unaligned address",
        })
    }
}

/// First rule violation found in a program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub index: usize,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "instruction {}: {} ({})", self.index, self.rule, self.detail)
    }
}

impl std::error::Error for Diagnostic {}

/// Check def-before-use (registers are single-assignment), End placement,
/// packed-format consistency and word alignment.
pub fn validate(p: &Program) -> Result<(), Diagnostic> {
    let diag = |index, rule, detail: String| Err(Diagnostic { index, rule, detail });
    let mut defined: HashSet<Reg> = HashSet::new();
    for (index, ins) in p.instrs.iter().enumerate() {
        if let Some(&r) = ins.srcs.iter().find(|r| !defined.contains(r)) {
            return diag(index, Rule::DefBeforeUse, format!("{r} used before definition"));
        }
        match ins.kind {
            InstrKind::End if index + 1 != p.instrs.len() => {
                return diag(index, Rule::EndPlacement, "end before the last instruction".into())
            }
            InstrKind::FpOp { op, fmt, vectorial } => {
                if vectorial && !fmt.is_16bit() {
                    return diag(index, Rule::VectorFormat, format!("vectorial {} in {fmt}", op.name()));
                }
                if op.is_packed_only() && !vectorial {
                    return diag(index, Rule::VectorFormat, format!("{} must be vectorial", op.name()));
                }
            }
            InstrKind::Load { addr, .. } | InstrKind::Store { addr, .. } if addr % 4 != 0 => {
                return diag(index, Rule::UnalignedAddress, format!("{addr:#x}"));
            }
            _ => {}
        }
        if let Some(d) = ins.dst {
            if !defined.insert(d) {
                return diag(index, Rule::Redefinition, format!("{d} defined twice"));
            }
        }
    }
    match p.instrs.last() {
        Some(Instr { kind: InstrKind::End, .. }) => Ok(()),
        _ => diag(p.instrs.len(), Rule::EndPlacement, "program does not end with end".into()),
    }
}

/// Instruction-class fractions of a stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreamStats {
    pub fp_intensity: f64,
    pub mem_intensity: f64,
    pub int_fraction: f64,
    pub counted: u64,
}

/// FP and memory intensity over all non-synchronization instructions.
pub fn stream_stats<'a>(programs: impl IntoIterator<Item = &'a Program>) -> StreamStats {
    let (mut fp, mut mem, mut total) = (0u64, 0u64, 0u64);
    for ins in programs.into_iter().flat_map(|p| p.instrs.iter()) {
        if ins.kind.is_sync() {
            continue;
        }
        total += 1;
        fp += ins.kind.is_fp() as u64;
        mem += ins.kind.is_mem() as u64;
    }
    if total == 0 {
        return StreamStats { fp_intensity: 0.0, mem_intensity: 0.0, int_fraction: 0.0, counted: 0 };
    }
    let t = total as f64;
    StreamStats {
        fp_intensity: fp as f64 / t,
        mem_intensity: mem as f64 / t,
        int_fraction: (total - fp - mem) as f64 / t,
        counted: total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int(dst: u32, srcs: &[u32]) -> Instr {
        Instr::new(InstrKind::IntOp, Some(Reg(dst)), srcs.iter().map(|&r| Reg(r)).collect())
    }

    fn load(dst: u32, addr: u32) -> Instr {
        Instr::new(InstrKind::Load { region: Region::Tcdm, addr }, Some(Reg(dst)), vec![])
    }

    fn fp(op: FpOpKind, fmt: FpFormat, vectorial: bool, dst: u32, srcs: &[u32]) -> Instr {
        Instr::new(
            InstrKind::FpOp { op, fmt, vectorial },
            Some(Reg(dst)),
            srcs.iter().map(|&r| Reg(r)).collect(),
        )
    }

    #[test]
    fn empty_program_is_valid() {
        assert_eq!(validate(&Program::new(0, vec![Instr::end()], 0)), Ok(()));
    }

    #[test]
    fn undefined_register_reported_at_its_index() {
        let p = Program::new(
            0,
            vec![int(1, &[]), int(2, &[1]), int(3, &[2]), int(4, &[7]), Instr::end()],
            0,
        );
        let d = validate(&p).unwrap_err();
        assert_eq!((d.index, d.rule), (3, Rule::DefBeforeUse));
    }

    #[test]
    fn vectorial_f32_rejected() {
        let p = Program::new(
            0,
            vec![load(1, 0), fp(FpOpKind::Vadd, FpFormat::F32, true, 2, &[1, 1]), Instr::end()],
            0,
        );
        assert_eq!(validate(&p).unwrap_err().rule, Rule::VectorFormat);
    }

    #[test]
    fn end_must_be_last_and_present() {
        let p = Program::new(0, vec![Instr::end(), int(1, &[]), Instr::end()], 0);
        assert_eq!(validate(&p).unwrap_err().index, 0);
        let p = Program::new(0, vec![int(1, &[])], 0);
        assert_eq!(validate(&p).unwrap_err().rule, Rule::EndPlacement);
        let p = Program::new(0, vec![load(1, 2), Instr::end()], 0);
        assert_eq!(validate(&p).unwrap_err().rule, Rule::UnalignedAddress);
    }

    #[test]
    fn stats_by_definition() {
        let mut instrs = Vec::new();
        for i in 0..5 {
            instrs.push(load(i, 4 * i));
        }
        for i in 5..8 {
            instrs.push(fp(FpOpKind::Add, FpFormat::F32, false, i, &[0, 1]));
        }
        instrs.push(int(8, &[]));
        instrs.push(int(9, &[]));
        instrs.push(Instr::barrier(0));
        instrs.push(Instr::end());
        let s = stream_stats([&Program::new(0, instrs, 3)]);
        assert!((s.fp_intensity - 0.3).abs() < 1e-12);
        assert!((s.mem_intensity - 0.5).abs() < 1e-12);
        assert_eq!(s.counted, 10);
    }

    #[test]
    fn all_int_stream() {
        let p = Program::new(0, vec![int(0, &[]), int(1, &[0]), Instr::end()], 0);
        let s = stream_stats([&p]);
        assert_eq!((s.fp_intensity, s.mem_intensity), (0.0, 0.0));
        assert_eq!(s.int_fraction, 1.0);
    }
}

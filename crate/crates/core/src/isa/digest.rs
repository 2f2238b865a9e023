use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::hash::{Hash, Hasher};

use super::{InstrKind, Program, Reg};

/// Symbolic summary of what a program computes.
///
/// Every value is replaced by a hash of the operation that produced it and
/// the hashes of its inputs; loads read the hash last stored at their
/// address. Two orderings of the same instructions produce equal digests
/// exactly when they feed every instruction the same inputs and leave the
/// same final memory image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Digest {
    pub memory: BTreeMap<u32, u64>,
    /// Order-independent combination of every produced value.
    pub values: u64,
}

fn hash_of(parts: impl Hash) -> u64 {
    let mut h = DefaultHasher::new();
    parts.hash(&mut h);
    h.finish()
}

pub fn dataflow_digest(p: &Program) -> Digest {
    let mut regs: HashMap<Reg, u64> = HashMap::new();
    let mut memory: BTreeMap<u32, u64> = BTreeMap::new();
    let mut values = 0u64;
    for ins in &p.instrs {
        let inputs: Vec<u64> = ins.srcs.iter().map(|r| regs.get(r).copied().unwrap_or(0)).collect();
        let produced = match ins.kind {
            InstrKind::Load { addr, region } => {
                let cur = memory.get(&addr).copied().unwrap_or_else(|| hash_of(("init", addr)));
                hash_of(("ld", region, cur, &inputs))
            }
            InstrKind::Store { addr, .. } => {
                let v = hash_of(("st", &inputs));
                memory.insert(addr, v);
                v
            }
            kind => hash_of((kind, &inputs)),
        };
        values = values.wrapping_add(produced);
        if let Some(d) = ins.dst {
            regs.insert(d, produced);
        }
    }
    Digest { memory, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{Instr, Region};

    fn ld(d: u32, addr: u32) -> Instr {
        Instr::new(InstrKind::Load { region: Region::Tcdm, addr }, Some(Reg(d)), vec![])
    }

    fn st(s: u32, addr: u32) -> Instr {
        Instr::new(InstrKind::Store { region: Region::Tcdm, addr }, None, vec![Reg(s)])
    }

    #[test]
    fn reordering_independent_loads_keeps_digest() {
        let a = Program::new(0, vec![ld(1, 0), ld(2, 4), st(1, 8), Instr::end()], 0);
        let b = Program::new(0, vec![ld(2, 4), ld(1, 0), st(1, 8), Instr::end()], 0);
        assert_eq!(dataflow_digest(&a), dataflow_digest(&b));
    }

    #[test]
    fn load_store_swap_changes_digest() {
        let a = Program::new(0, vec![ld(1, 0), ld(2, 8), st(1, 8), Instr::end()], 0);
        let b = Program::new(0, vec![ld(1, 0), st(1, 8), ld(2, 8), Instr::end()], 0);
        assert_ne!(dataflow_digest(&a), dataflow_digest(&b));
    }
}

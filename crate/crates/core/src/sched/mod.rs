//! Latency-aware list scheduling of straight-line instruction blocks.
//!
//! Blocks are the runs of instructions between synchronization points
//! (barriers and the final `End`); nothing moves across them. Within a
//! block, instructions are issued in a simulated single-issue order that
//! always picks, among the instructions whose operands are available, the
//! one with the longest latency-weighted path to the end of the block.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use crate::isa::{Instr, InstrKind, Program, Region};
use crate::timing::{divsqrt_cycles, simulate, ClusterConfig, SimError};

/// Dependencies of one block. Besides register def-use edges it carries
/// memory-order edges between accesses to the same address when at least
/// one of them is a store.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepGraph {
    pub latency: Vec<u64>,
    pub succs: Vec<Vec<usize>>,
    pub preds: Vec<Vec<usize>>,
}

pub fn latency(kind: &InstrKind, stages: u8) -> u64 {
    match kind {
        InstrKind::FpOp { .. } => u64::from(stages) + 1,
        InstrKind::FpDivSqrt { fmt, .. } => divsqrt_cycles(*fmt),
        _ => 1,
    }
}

impl DepGraph {
    pub fn build(block: &[Instr], stages: u8) -> Self {
        let n = block.len();
        let mut succs = vec![Vec::new(); n];
        let mut preds = vec![Vec::new(); n];
        let mut def = HashMap::new();
        // per address: last store, loads since that store
        let mut mem: HashMap<(bool, u32), (Option<usize>, Vec<usize>)> = HashMap::new();
        let edge = |a: usize, b: usize, succs: &mut Vec<Vec<usize>>, preds: &mut Vec<Vec<usize>>| {
            if !preds[b].contains(&a) {
                succs[a].push(b);
                preds[b].push(a);
            }
        };
        for (i, ins) in block.iter().enumerate() {
            for s in &ins.srcs {
                if let Some(&d) = def.get(s) {
                    edge(d, i, &mut succs, &mut preds);
                }
            }
            match ins.kind {
                InstrKind::Load { region, addr } => {
                    let e = mem.entry((region == Region::L2, addr)).or_default();
                    if let Some(st) = e.0 {
                        edge(st, i, &mut succs, &mut preds);
                    }
                    e.1.push(i);
                }
                InstrKind::Store { region, addr } => {
                    let e = mem.entry((region == Region::L2, addr)).or_default();
                    for &j in e.1.iter().chain(e.0.iter()) {
                        edge(j, i, &mut succs, &mut preds);
                    }
                    *e = (Some(i), Vec::new());
                }
                _ => {}
            }
            if let Some(d) = ins.dst {
                def.insert(d, i);
            }
        }
        let latency = block.iter().map(|i| latency(&i.kind, stages)).collect();
        DepGraph { latency, succs, preds }
    }

    /// Longest latency-weighted path from each node to the end of the block.
    pub fn critical_path(&self) -> Vec<u64> {
        let n = self.latency.len();
        let mut cp = vec![0; n];
        for i in (0..n).rev() {
            cp[i] = self.latency[i] + self.succs[i].iter().map(|&j| cp[j]).max().unwrap_or(0);
        }
        cp
    }
}

fn schedule_block(block: &[Instr], stages: u8) -> Vec<Instr> {
    let g = DepGraph::build(block, stages);
    let cp = g.critical_path();
    let n = block.len();
    let mut missing: Vec<usize> = g.preds.iter().map(Vec::len).collect();
    let mut earliest = vec![0u64; n];
    // (time, index) of instructions whose predecessors have all issued
    let mut waiting: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    let mut avail: BinaryHeap<(u64, Reverse<usize>)> = BinaryHeap::new();
    for i in (0..n).filter(|&i| missing[i] == 0) {
        waiting.push(Reverse((0, i)));
    }
    let mut divsqrt_free = 0u64;
    let mut t = 0u64;
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        while let Some(&Reverse((e, i))) = waiting.peek() {
            if e > t {
                break;
            }
            waiting.pop();
            avail.push((cp[i], Reverse(i)));
        }
        let Some((_, Reverse(i))) = avail.pop() else {
            t = waiting.peek().map_or(t, |Reverse((e, _))| *e);
            continue;
        };
        if let InstrKind::FpDivSqrt { .. } = block[i].kind {
            if divsqrt_free > t {
                waiting.push(Reverse((divsqrt_free, i)));
                continue;
            }
            divsqrt_free = t + g.latency[i];
        }
        order.push(i);
        for &j in &g.succs[i] {
            earliest[j] = earliest[j].max(t + g.latency[i]);
            missing[j] -= 1;
            if missing[j] == 0 {
                waiting.push(Reverse((earliest[j], j)));
            }
        }
        t += 1;
    }
    order.into_iter().map(|i| block[i].clone()).collect()
}

/// Reorder every straight-line block of `instrs` for a FPU with `stages`
/// pipeline registers. Barriers and `End` keep their positions relative to
/// the blocks.
pub fn list_schedule(instrs: &[Instr], stages: u8) -> Vec<Instr> {
    let mut out = Vec::with_capacity(instrs.len());
    for part in instrs.split_inclusive(|i| i.kind.is_sync()) {
        let (body, sync) = match part.last() {
            Some(l) if l.kind.is_sync() => (&part[..part.len() - 1], Some(l)),
            _ => (part, None),
        };
        out.extend(schedule_block(body, stages));
        out.extend(sync.cloned());
    }
    out
}

/// Schedule a program block by block, keeping the original order of any
/// block whose scheduled form runs slower on a single core with the given
/// pipeline depth.
pub fn schedule_program(p: &Program, stages: u8) -> Result<Program, SimError> {
    let cfg = ClusterConfig::new(1, 1, stages)?;
    let single = |instrs: Vec<Instr>| -> Result<(Program, u64), SimError> {
        let prog = Program::new(0, instrs, p.flops);
        let c = simulate(&cfg, std::slice::from_ref(&prog))?.elapsed_cycles;
        Ok((prog, c))
    };
    let parts: Vec<&[Instr]> = p.instrs.split_inclusive(|i| i.kind.is_sync()).collect();
    let (_, mut best_cycles) = single(p.instrs.clone())?;
    let mut current: Vec<Vec<Instr>> = parts.iter().map(|s| s.to_vec()).collect();
    for k in 0..parts.len() {
        let candidate = list_schedule(parts[k], stages);
        if candidate == current[k] {
            continue;
        }
        let previous = std::mem::replace(&mut current[k], candidate);
        let (_, c) = single(current.concat())?;
        if c <= best_cycles {
            best_cycles = c;
        } else {
            current[k] = previous;
        }
    }
    Ok(Program::new(p.core_id, current.concat(), p.flops))
}

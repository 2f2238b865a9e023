use std::collections::VecDeque;

use super::{arbitrate, divsqrt_cycles, fpu_map, tcdm_bank, ClusterConfig, Counters, SimError, SimResult};
use crate::isa::{validate, InstrKind, Program, Region};

#[derive(Clone, Copy, Default)]
struct RegState {
    /// First cycle a consumer may issue.
    ready: u64,
    /// `ready` before any write-back port delay.
    nominal: u64,
    from_fpu: bool,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    Run,
    /// Blocked on an L2 access through the given cycle.
    Busy(u64),
    AtBarrier,
    Done,
}

struct Core<'a> {
    prog: &'a Program,
    pc: usize,
    phase: Phase,
    finish: u64,
    regs: Vec<RegState>,
    /// FP results still to be written back, as (cycle, register), in cycle order.
    pending_wb: VecDeque<(u64, u32)>,
    c: Counters,
}

impl<'a> Core<'a> {
    fn new(prog: &'a Program) -> Self {
        let max_reg = prog
            .instrs
            .iter()
            .flat_map(|i| i.dst.iter().chain(i.srcs.iter()))
            .map(|r| r.0 as usize + 1)
            .max()
            .unwrap_or(0);
        let mut core = Core {
            prog,
            pc: 0,
            phase: Phase::Run,
            finish: 0,
            regs: vec![RegState::default(); max_reg],
            pending_wb: VecDeque::new(),
            c: Counters::default(),
        };
        core.settle(0);
        core
    }

    fn kind(&self) -> InstrKind {
        self.prog.instrs[self.pc].kind
    }

    /// Mark the core finished when it has reached its terminating instruction.
    fn settle(&mut self, t: u64) {
        if self.prog.instrs.get(self.pc).is_none_or(|i| i.kind == InstrKind::End) {
            self.phase = Phase::Done;
            self.finish = t;
        }
    }

    /// Cycle-`t` readiness check of the next instruction's sources. On a
    /// stall the cycle is charged to the matching counter.
    fn sources_ready(&mut self, t: u64) -> bool {
        let (mut waiting, mut latency) = (false, false);
        for r in &self.prog.instrs[self.pc].srcs {
            let s = self.regs[r.0 as usize];
            if s.ready <= t {
                continue;
            }
            if !s.from_fpu {
                self.c.l2_stall += 1;
                return false;
            }
            waiting = true;
            latency |= t < s.nominal;
        }
        if !waiting {
            return true;
        }
        if latency {
            self.c.fpu_stall += 1;
        } else {
            self.c.fpu_wb_stall += 1;
        }
        false
    }

    fn set_dst(&mut self, ready: u64, from_fpu: bool) {
        if let Some(d) = self.prog.instrs[self.pc].dst {
            self.regs[d.0 as usize] = RegState { ready, nominal: ready, from_fpu };
        }
    }

    fn advance(&mut self, t: u64) {
        self.c.active += 1;
        self.pc += 1;
        self.settle(t);
    }
}

fn check_barriers(programs: &[Program]) -> Result<(), SimError> {
    let reference = programs[0].barrier_ids();
    for (core, p) in programs.iter().enumerate().skip(1) {
        let ids = p.barrier_ids();
        let n = ids.len().max(reference.len());
        for i in 0..n {
            match (reference.get(i), ids.get(i)) {
                (Some(a), Some(b)) if a == b => {}
                (_, Some(&id)) | (Some(&id), None) => return Err(SimError::Barrier { id, core }),
                (None, None) => unreachable!(),
            }
        }
    }
    Ok(())
}

fn precheck(cfg: &ClusterConfig, programs: &[Program]) -> Result<(), SimError> {
    cfg.check()?;
    if programs.len() != cfg.n_cores {
        return Err(SimError::ProgramCount { expected: cfg.n_cores, found: programs.len() });
    }
    for (index, p) in programs.iter().enumerate() {
        if p.core_id != index {
            return Err(SimError::CoreMismatch { index, core_id: p.core_id });
        }
        validate(p).map_err(|diag| SimError::Invalid { core: index, diag })?;
        for ins in &p.instrs {
            if let InstrKind::Load { region: Region::Tcdm, addr } | InstrKind::Store { region: Region::Tcdm, addr } =
                ins.kind
            {
                tcdm_bank(addr, cfg.n_tcdm_banks).map_err(|source| SimError::Unaligned { core: index, source })?;
            }
        }
    }
    check_barriers(programs)
}

/// Run one program per core to completion and collect per-core counters.
///
/// Cycles are numbered from 1. Within a cycle every core first states what
/// it wants from the state left by the previous cycle, then banks, FPUs and
/// the divide/square-root unit each grant one requester round-robin, so the
/// outcome does not depend on the order cores are visited.
pub fn simulate(cfg: &ClusterConfig, programs: &[Program]) -> Result<SimResult, SimError> {
    precheck(cfg, programs)?;
    let n = cfg.n_cores;
    let stages = cfg.pipeline_stages;
    let mut cores: Vec<Core> = programs.iter().map(Core::new).collect();

    let mut bank_last = vec![n - 1; cfg.n_tcdm_banks];
    let mut fpu_last = vec![n - 1; cfg.n_fpus];
    let mut ds_last = n - 1;
    let mut ds_busy_until = 0u64;

    let mut bank_req: Vec<Vec<usize>> = vec![Vec::new(); cfg.n_tcdm_banks];
    let mut fpu_req: Vec<Vec<usize>> = vec![Vec::new(); cfg.n_fpus];
    let mut ds_req: Vec<usize> = Vec::new();
    let mut int_wb = vec![false; n];

    let mut t = 0u64;
    while cores.iter().any(|c| c.phase != Phase::Done) {
        t += 1;
        int_wb.iter_mut().for_each(|w| *w = false);

        for (id, core) in cores.iter_mut().enumerate() {
            match core.phase {
                Phase::Done | Phase::AtBarrier => continue,
                Phase::Busy(until) if t <= until => {
                    core.c.l2_stall += 1;
                    continue;
                }
                Phase::Busy(_) => {
                    core.phase = Phase::Run;
                    core.settle(t - 1);
                    if core.phase == Phase::Done {
                        continue;
                    }
                }
                Phase::Run => {}
            }
            if !core.sources_ready(t) {
                continue;
            }
            match core.kind() {
                InstrKind::IntOp => {
                    core.set_dst(t + 1, false);
                    int_wb[id] = true;
                    core.advance(t);
                }
                InstrKind::Load { region: Region::L2, .. } | InstrKind::Store { region: Region::L2, .. } => {
                    let lat = cfg.l2_latency_cycles.max(1) as u64;
                    core.set_dst(t + lat, false);
                    int_wb[id] = true;
                    core.c.active += 1;
                    core.pc += 1;
                    core.phase = Phase::Busy(t + lat - 1);
                }
                InstrKind::Load { addr, .. } | InstrKind::Store { addr, .. } => {
                    let bank = (addr / 4) as usize % cfg.n_tcdm_banks;
                    bank_req[bank].push(id);
                }
                InstrKind::FpOp { .. } => {
                    let f = fpu_map(id, n, cfg.n_fpus);
                    fpu_req[f].push(id);
                }
                InstrKind::FpDivSqrt { .. } => {
                    ds_req.push(id);
                }
                InstrKind::Barrier { .. } => core.phase = Phase::AtBarrier,
                InstrKind::End => unreachable!("settled cores never face End"),
            }
        }

        // Grants. Cores are added to the request lists in ascending id
        // order, and arbitration looks only at the lists.
        for (bank, reqs) in bank_req.iter_mut().enumerate().filter(|(_, r)| !r.is_empty()) {
            let winner = arbitrate(reqs, bank_last[bank]);
            bank_last[bank] = winner;
            for &id in reqs.iter() {
                let core = &mut cores[id];
                if id == winner {
                    core.set_dst(t + 1, false);
                    int_wb[id] = true;
                    core.advance(t);
                } else {
                    core.c.tcdm_contention += 1;
                }
            }
            reqs.clear();
        }
        for (f, reqs) in fpu_req.iter_mut().enumerate().filter(|(_, r)| !r.is_empty()) {
            let winner = arbitrate(reqs, fpu_last[f]);
            fpu_last[f] = winner;
            for &id in reqs.iter() {
                let core = &mut cores[id];
                if id == winner {
                    core.set_dst(t + stages as u64 + 1, true);
                    if stages == 2 {
                        if let Some(d) = core.prog.instrs[core.pc].dst {
                            core.pending_wb.push_back((t + 2, d.0));
                        }
                    }
                    core.advance(t);
                } else {
                    core.c.fpu_contention += 1;
                }
            }
            reqs.clear();
        }
        if !ds_req.is_empty() {
            let winner = (ds_busy_until < t).then(|| arbitrate(&ds_req, ds_last));
            for &id in &ds_req {
                let core = &mut cores[id];
                if Some(id) == winner {
                    let InstrKind::FpDivSqrt { fmt, .. } = core.kind() else { unreachable!() };
                    let occ = divsqrt_cycles(fmt);
                    ds_busy_until = t + occ - 1;
                    ds_last = id;
                    core.set_dst(t + occ, true);
                    core.advance(t);
                } else {
                    core.c.fpu_contention += 1;
                }
            }
            ds_req.clear();
        }

        // Register-file write-back port: integer and memory results win,
        // and at most one FP result is written per cycle.
        if stages == 2 {
            for (id, core) in cores.iter_mut().enumerate() {
                let mut port_taken = int_wb[id];
                let mut delayed = Vec::new();
                while core.pending_wb.front().is_some_and(|&(w, _)| w == t) {
                    let (_, reg) = core.pending_wb.pop_front().unwrap();
                    if port_taken {
                        core.regs[reg as usize].ready += 1;
                        delayed.push(reg);
                    } else {
                        port_taken = true;
                    }
                }
                for reg in delayed.into_iter().rev() {
                    core.pending_wb.push_front((t + 1, reg));
                }
            }
        }

        // Barrier release once every core has arrived.
        if cores.iter().all(|c| c.phase == Phase::AtBarrier) {
            for core in cores.iter_mut() {
                core.phase = Phase::Run;
                core.pc += 1;
                core.settle(t);
            }
        }
    }

    let elapsed = cores.iter().map(|c| c.finish).max().unwrap_or(0);
    let per_core = cores
        .into_iter()
        .map(|mut c| {
            c.c.total = elapsed;
            c.c
        })
        .collect();
    Ok(SimResult {
        elapsed_cycles: elapsed,
        per_core,
        total_flops: programs.iter().map(|p| p.flops).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{FpOpKind, Instr, Reg};
    use crate::timing::L2_LATENCY;
    use crate::tpfloat::{DivSqrtOp, FpFormat};
    use proptest::prelude::*;

    fn fadd(dst: u32, srcs: &[u32]) -> Instr {
        let kind = InstrKind::FpOp { op: FpOpKind::Add, fmt: FpFormat::F32, vectorial: false };
        Instr::new(kind, Some(Reg(dst)), srcs.iter().map(|&r| Reg(r)).collect())
    }

    fn int(dst: u32, srcs: &[u32]) -> Instr {
        Instr::new(InstrKind::IntOp, Some(Reg(dst)), srcs.iter().map(|&r| Reg(r)).collect())
    }

    fn load(region: Region, dst: u32, addr: u32) -> Instr {
        Instr::new(InstrKind::Load { region, addr }, Some(Reg(dst)), vec![])
    }

    fn prog(core: usize, mut instrs: Vec<Instr>) -> Program {
        instrs.push(Instr::end());
        Program::new(core, instrs, 0)
    }

    fn run(cores: usize, fpus: usize, stages: u8, progs: Vec<Program>) -> SimResult {
        simulate(&ClusterConfig::new(cores, fpus, stages).unwrap(), &progs).unwrap()
    }

    #[test]
    fn dependent_add_waits_for_latency() {
        let r = run(1, 1, 1, vec![prog(0, vec![fadd(1, &[]), fadd(2, &[1])])]);
        let c = r.per_core[0];
        assert_eq!(r.elapsed_cycles, 3);
        assert_eq!((c.active, c.fpu_stall), (2, 1));
    }

    #[test]
    fn latency_grows_with_stages() {
        for stages in 0..=2u8 {
            let r = run(1, 1, stages, vec![prog(0, vec![fadd(1, &[]), fadd(2, &[1])])]);
            assert_eq!(r.per_core[0].fpu_stall, stages as u64);
        }
    }

    #[test]
    fn divsqrt_unit_is_not_pipelined() {
        let div = |dst| Instr::new(
            InstrKind::FpDivSqrt { op: DivSqrtOp::Div, fmt: FpFormat::F32 },
            Some(Reg(dst)),
            vec![],
        );
        let p = |core| prog(core, vec![div(1), int(2, &[1])]);
        let r = run(2, 2, 1, vec![p(0), p(1)]);
        // core 0: div at 1, result usable at 12; core 1 waits for the unit
        // to free up at 12, its result is usable at 23.
        assert_eq!(r.elapsed_cycles, 23);
        assert_eq!(r.per_core[0].fpu_stall, 10);
        assert_eq!(r.per_core[1].fpu_contention, 11);
        assert_eq!(r.per_core[1].fpu_stall, 10);
    }

    #[test]
    fn divsqrt_occupancy_by_format() {
        for (fmt, occ) in [(FpFormat::F32, 11), (FpFormat::F16, 7), (FpFormat::BF16, 6)] {
            let ds = Instr::new(InstrKind::FpDivSqrt { op: DivSqrtOp::Sqrt, fmt }, Some(Reg(1)), vec![]);
            let r = run(1, 1, 0, vec![prog(0, vec![ds, int(2, &[1])])]);
            assert_eq!(r.elapsed_cycles, occ + 1);
        }
    }

    #[test]
    fn shared_fpu_alternates() {
        let p = |core| prog(core, (0..100).map(|i| fadd(i, &[])).collect());
        let r = run(2, 1, 1, vec![p(0), p(1)]);
        assert_eq!(r.elapsed_cycles, 200);
        assert_eq!(r.per_core[0].fpu_contention, 99);
        assert_eq!(r.per_core[1].fpu_contention, 100);

        let private = run(2, 2, 1, vec![p(0), p(1)]);
        assert_eq!(private.elapsed_cycles, 100);
        assert!(private.per_core.iter().all(|c| c.fpu_contention == 0));
    }

    #[test]
    fn write_back_port_conflict_only_with_two_stages() {
        let body = vec![fadd(1, &[]), int(2, &[]), int(3, &[]), fadd(4, &[1])];
        let r2 = run(1, 1, 2, vec![prog(0, body.clone())]);
        let c = r2.per_core[0];
        // r1 would be usable at 4 but its write-back collides with the
        // integer op at 3, so the consumer issues at 5.
        assert_eq!(r2.elapsed_cycles, 5);
        assert_eq!((c.fpu_wb_stall, c.fpu_stall), (1, 0));
        for stages in [0, 1] {
            assert_eq!(run(1, 1, stages, vec![prog(0, body.clone())]).per_core[0].fpu_wb_stall, 0);
        }
    }

    #[test]
    fn l2_access_blocks_core() {
        let r = run(1, 1, 0, vec![prog(0, vec![load(Region::L2, 1, 0), int(2, &[1])])]);
        let c = r.per_core[0];
        assert_eq!(r.elapsed_cycles, L2_LATENCY as u64 + 1);
        assert_eq!(c.l2_stall, L2_LATENCY as u64 - 1);
        assert_eq!(c.active, 2);
    }

    #[test]
    fn bank_conflict_serializes() {
        let cfg = ClusterConfig::new(2, 2, 0).unwrap();
        let same = cfg.n_tcdm_banks as u32 * 4;
        let progs = vec![prog(0, vec![load(Region::Tcdm, 1, 0)]), prog(1, vec![load(Region::Tcdm, 1, same)])];
        let r = simulate(&cfg, &progs).unwrap();
        assert_eq!(r.elapsed_cycles, 2);
        assert_eq!((r.per_core[0].tcdm_contention, r.per_core[1].tcdm_contention), (0, 1));

        let apart = vec![prog(0, vec![load(Region::Tcdm, 1, 0)]), prog(1, vec![load(Region::Tcdm, 1, 4)])];
        assert_eq!(simulate(&cfg, &apart).unwrap().elapsed_cycles, 1);
    }

    #[test]
    fn barrier_idles_early_arrivals() {
        let busy = prog(0, (0..10).map(|i| int(i, &[])).chain([Instr::barrier(0)]).collect());
        let eager = prog(1, vec![Instr::barrier(0), int(0, &[])]);
        let r = run(2, 2, 0, vec![busy, eager]);
        assert_eq!(r.elapsed_cycles, 12);
        assert_eq!(r.per_core[1].active, 1);
        assert_eq!(r.per_core[1].idle(), 11);
        assert_eq!(r.per_core[0].idle(), 2);
    }

    #[test]
    fn barrier_mismatch_names_id() {
        let progs = vec![prog(0, vec![Instr::barrier(1), Instr::barrier(2)]), prog(1, vec![Instr::barrier(1), Instr::barrier(3)])];
        let err = simulate(&ClusterConfig::new(2, 2, 0).unwrap(), &progs).unwrap_err();
        assert!(matches!(err, SimError::Barrier { id: 3, core: 1 }));
        assert!(err.to_string().contains("barrier 3"));
    }

    #[test]
    fn wrong_program_count_rejected() {
        let err = simulate(&ClusterConfig::new(2, 2, 0).unwrap(), &[prog(0, vec![])]).unwrap_err();
        assert!(matches!(err, SimError::ProgramCount { expected: 2, found: 1 }));
    }

    fn arb_program(core: usize, barriers: usize) -> impl Strategy<Value = Program> {
        prop::collection::vec((0u8..6, 0u32..64, any::<u8>()), 0..60).prop_map(move |ops| {
            let mut instrs = Vec::new();
            let mut next = 0u32;
            for (i, (op, addr, pick)) in ops.into_iter().enumerate() {
                let src: Vec<u32> = if next > 0 { vec![pick as u32 % next] } else { vec![] };
                let kind = match op {
                    0 => InstrKind::IntOp,
                    1 => InstrKind::Load { region: Region::Tcdm, addr: addr * 4 },
                    2 => InstrKind::FpOp { op: FpOpKind::Fma, fmt: FpFormat::F32, vectorial: false },
                    3 => InstrKind::FpOp { op: FpOpKind::Vfdotp, fmt: FpFormat::F16, vectorial: true },
                    4 if pick % 8 == 0 => InstrKind::FpDivSqrt { op: DivSqrtOp::Div, fmt: FpFormat::BF16 },
                    _ => InstrKind::Load { region: if pick % 16 == 0 { Region::L2 } else { Region::Tcdm }, addr: addr * 4 },
                };
                instrs.push(Instr::new(kind, Some(Reg(next)), src.into_iter().map(Reg).collect()));
                next += 1;
                if barriers > 0 && i % 20 == 19 && i / 20 < barriers {
                    instrs.push(Instr::barrier((i / 20) as u32));
                }
            }
            let used: usize = instrs.iter().filter(|i| i.kind.is_sync()).count();
            for id in used..barriers {
                instrs.push(Instr::barrier(id as u32));
            }
            instrs.push(Instr::end());
            Program::new(core, instrs, 0)
        })
    }

    fn arb_cluster() -> impl Strategy<Value = Vec<Program>> {
        (0usize..3).prop_flat_map(|b| (0..4).map(|c| arb_program(c, b)).collect::<Vec<_>>())
    }

    proptest! {
        #[test]
        fn counters_are_conserved(progs in arb_cluster(), fpus in prop::sample::select(vec![1usize, 2, 4]), stages in 0u8..3) {
            let cfg = ClusterConfig::new(4, fpus, stages).unwrap();
            let r = simulate(&cfg, &progs).unwrap();
            for (c, p) in r.per_core.iter().zip(&progs) {
                prop_assert_eq!(c.total, r.elapsed_cycles);
                prop_assert!(c.active + c.stalls() <= c.total);
                let issued = p.instrs.iter().filter(|i| !i.kind.is_sync()).count() as u64;
                prop_assert_eq!(c.active, issued);
                prop_assert_eq!(c.icache_miss, 0);
                if fpus == 4 {
                    prop_assert_eq!(c.fpu_contention == 0 || p.instrs.iter().any(|i| matches!(i.kind, InstrKind::FpDivSqrt { .. })), true);
                }
                if stages != 2 {
                    prop_assert_eq!(c.fpu_wb_stall, 0);
                }
            }
            prop_assert_eq!(simulate(&cfg, &progs).unwrap(), r);
        }
    }
}

//! y[n] = sum_t h[t] * x[n + t], outputs split across cores.
//!
//! The packed variant produces outputs n and n+1 together: the aligned
//! input pair serves output n and a shuffle of two aligned pairs gives the
//! odd-offset pair for output n+1.

use super::arith::Arith;
use super::emit::{skewed_chunk, Emitter, Layout};
use super::{rng, uniform, KernelData, KernelSpec};
use crate::isa::{FpOpKind, Program};

const BK_PER_OUT: f64 = 1.0;
const VBK_PER_STEP: f64 = 0.25;
const VBK_PER_OUT: f64 = 1.0;

pub(super) fn build(spec: &KernelSpec) -> (KernelData, Vec<Program>, u32) {
    let (n, taps) = (spec.dims.size, spec.dims.taps);
    let fmt = spec.variant.format();
    let mut r = rng(spec);
    let mut data = KernelData::default();
    data.push("h", uniform(&mut r, taps, 0.5, fmt));
    data.push("x", uniform(&mut r, n + taps - 1, 1.0, fmt));

    let mut lay = Layout::new();
    let programs = if spec.variant.is_vector() {
        let tp = taps.div_ceil(2);
        let pairs = n.div_ceil(2);
        let hs = lay.alloc_copies(tp, spec.n_cores);
        let x = lay.alloc(pairs + tp + 1);
        let y = lay.alloc(pairs);
        (0..spec.n_cores)
            .map(|core| {
                let mut e = Emitter::new(core, fmt);
                let h = hs[core];
                for np in skewed_chunk(pairs, spec.n_cores, core, 1) {
                    let mut acc = [e.int(&[]), e.int(&[])];
                    for t in 0..tp {
                        let hv = e.ld(h.at(t));
                        let xa = e.ld(x.at(np + t));
                        let xb = e.ld(x.at(np + t + 1));
                        let xs = e.int(&[xa, xb]);
                        acc[0] = e.vfp(FpOpKind::Vfdotp, &[hv, xa, acc[0]]);
                        acc[1] = e.vfp(FpOpKind::Vfdotp, &[hv, xs, acc[1]]);
                        e.bookkeeping(VBK_PER_STEP);
                    }
                    let p = e.vfp(FpOpKind::CastPack, &[acc[0], acc[1]]);
                    e.st(y.at(np), p);
                    e.bookkeeping(VBK_PER_OUT);
                    let real = if 2 * np + 1 < n { 2 } else { 1 };
                    e.flops(real * 2 * taps as u64);
                }
                e.finish()
            })
            .collect()
    } else {
        let hs = lay.alloc_copies(taps, spec.n_cores);
        let x = lay.alloc(n + taps - 1);
        let y = lay.alloc(n);
        (0..spec.n_cores)
            .map(|core| {
                let mut e = Emitter::new(core, fmt);
                let h = hs[core];
                for i in skewed_chunk(n, spec.n_cores, core, 2) {
                    let mut acc = e.int(&[]);
                    for t in 0..taps {
                        let hv = e.ld(h.at(t));
                        let xv = e.ld(x.at(i + t));
                        acc = e.sfp(FpOpKind::Fma, &[hv, xv, acc]);
                    }
                    e.st(y.at(i), acc);
                    e.bookkeeping(BK_PER_OUT);
                    e.flops(2 * taps as u64);
                }
                e.finish()
            })
            .collect()
    };
    (data, programs, lay.bytes())
}

pub(super) fn compute<A: Arith>(ar: &A, spec: &KernelSpec, data: &KernelData) -> Vec<f64> {
    let (n, taps) = (spec.dims.size, spec.dims.taps);
    let h: Vec<A::N> = data.get("h").iter().map(|&v| ar.input(v)).collect();
    let x: Vec<A::N> = data.get("x").iter().map(|&v| ar.input(v)).collect();
    let zero = ar.input(0.0);
    let hx = |t: usize| if t < taps { h[t] } else { zero };
    let xx = |i: usize| x.get(i).copied().unwrap_or(zero);
    (0..n)
        .map(|i| {
            let mut acc = ar.wide(0.0);
            if spec.variant.is_vector() {
                for t in (0..taps).step_by(2) {
                    acc = ar.dot2([hx(t), hx(t + 1)], [xx(i + t), xx(i + t + 1)], acc);
                }
            } else {
                for t in 0..taps {
                    acc = ar.mac(h[t], x[i + t], acc);
                }
            }
            ar.n64(ar.narrow(acc))
        })
        .collect()
}

//! Valid 2D convolution (correlation form) of a square image with a square
//! kernel; output pixels split across cores.
//!
//! The packed variant keeps the kernel rows in registers and produces two
//! horizontally adjacent outputs per step, the odd one from shuffled pairs.

use super::arith::Arith;
use super::emit::{chunk, skewed_chunk, Emitter, Layout};
use super::{rng, uniform, KernelData, KernelSpec};
use crate::isa::{FpOpKind, Program};

const BK_PER_OUT: f64 = 1.0;
const VBK_PER_ROW: f64 = 5.0;
const VBK_PER_OUT: f64 = 2.0;

pub(super) fn build(spec: &KernelSpec) -> (KernelData, Vec<Program>, u32) {
    let (h, k) = (spec.dims.size, spec.dims.taps);
    let o = h - k + 1;
    let fmt = spec.variant.format();
    let mut r = rng(spec);
    let mut data = KernelData::default();
    data.push("w", uniform(&mut r, k * k, 0.5, fmt));
    data.push("img", uniform(&mut r, h * h, 1.0, fmt));

    const SKEW: usize = 4;
    let mut lay = Layout::new();
    let programs = if spec.variant.is_vector() {
        let kp = k.div_ceil(2);
        let opairs = o.div_ceil(2);
        let row_words = opairs + kp + 1;
        let w = lay.alloc(k * kp);
        let img = lay.alloc(h * row_words);
        let out = lay.alloc(o * opairs);
        (0..spec.n_cores)
            .map(|core| {
                let mut e = Emitter::new(core, fmt);
                if chunk(o * opairs, spec.n_cores, core).is_empty() {
                    return e.finish();
                }
                let wr: Vec<_> = (0..k * kp).map(|i| e.ld(w.at(i))).collect();
                for idx in skewed_chunk(o * opairs, spec.n_cores, core, SKEW) {
                    let (row, cp) = (idx / opairs, idx % opairs);
                    let mut acc = [e.int(&[]), e.int(&[])];
                    for i in 0..k {
                        let base = (row + i) * row_words + cp;
                        for m in 0..kp {
                            let p = e.ld(img.at(base + m));
                            acc[0] = e.vfp(FpOpKind::Vfdotp, &[wr[i * kp + m], p, acc[0]]);
                        }
                        let q: Vec<_> = (0..=kp).map(|m| e.ld(img.at(base + m))).collect();
                        for m in 0..kp {
                            let s = e.int(&[q[m], q[m + 1]]);
                            acc[1] = e.vfp(FpOpKind::Vfdotp, &[wr[i * kp + m], s, acc[1]]);
                        }
                        e.bookkeeping(VBK_PER_ROW);
                    }
                    let p = e.vfp(FpOpKind::CastPack, &[acc[0], acc[1]]);
                    e.st(out.at(idx), p);
                    e.bookkeeping(VBK_PER_OUT);
                    let real = if 2 * cp + 1 < o { 2 } else { 1 };
                    e.flops(real * 2 * (k * k) as u64);
                }
                e.finish()
            })
            .collect()
    } else {
        let w = lay.alloc(k * k);
        let img = lay.alloc(h * h);
        let out = lay.alloc(o * o);
        (0..spec.n_cores)
            .map(|core| {
                let mut e = Emitter::new(core, fmt);
                for idx in chunk(o * o, spec.n_cores, core) {
                    let (row, col) = (idx / o, idx % o);
                    let mut acc = e.int(&[]);
                    for i in 0..k {
                        for j in 0..k {
                            let wv = e.ld(w.at(i * k + j));
                            let pv = e.ld(img.at((row + i) * h + col + j));
                            acc = e.sfp(FpOpKind::Fma, &[wv, pv, acc]);
                        }
                    }
                    e.st(out.at(idx), acc);
                    e.bookkeeping(BK_PER_OUT);
                    e.flops(2 * (k * k) as u64);
                }
                e.finish()
            })
            .collect()
    };
    (data, programs, lay.bytes())
}

pub(super) fn compute<A: Arith>(ar: &A, spec: &KernelSpec, data: &KernelData) -> Vec<f64> {
    let (h, k) = (spec.dims.size, spec.dims.taps);
    let o = h - k + 1;
    let w: Vec<A::N> = data.get("w").iter().map(|&v| ar.input(v)).collect();
    let img: Vec<A::N> = data.get("img").iter().map(|&v| ar.input(v)).collect();
    let zero = ar.input(0.0);
    let wt = |i: usize, j: usize| if j < k { w[i * k + j] } else { zero };
    let px = |r: usize, c: usize| if c < h { img[r * h + c] } else { zero };
    let mut out = Vec::with_capacity(o * o);
    for row in 0..o {
        for col in 0..o {
            let mut acc = ar.wide(0.0);
            for i in 0..k {
                if spec.variant.is_vector() {
                    for j in (0..k).step_by(2) {
                        let r = row + i;
                        acc = ar.dot2([wt(i, j), wt(i, j + 1)], [px(r, col + j), px(r, col + j + 1)], acc);
                    }
                } else {
                    for j in 0..k {
                        acc = ar.mac(w[i * k + j], img[(row + i) * h + col + j], acc);
                    }
                }
            }
            out.push(ar.n64(ar.narrow(acc)));
        }
    }
    out
}

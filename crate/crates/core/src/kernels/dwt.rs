//! Multi-level 1D discrete wavelet transform with a 4-tap orthogonal
//! (Daubechies) low-pass/high-pass filter bank and periodic extension.
//!
//! Each level filters in parallel; then core 0 alone copies the low-pass
//! half back into the working buffer (plus the two wrap-around samples)
//! for the next level, between two barriers.
//!
//! The packed variant computes two low-pass (or high-pass) outputs per
//! lane-wise multiply-add chain, building even/odd sample pairs from
//! element loads.

use super::arith::Arith;
use super::emit::{skewed_chunk, Emitter, Layout};
use super::{quantize, rng, uniform, KernelData, KernelSpec};
use crate::isa::{FpOpKind, Program};
use crate::tpfloat::FpFormat;

const BK_PER_PAIR: f64 = 2.6;
const BK_PER_COPY: f64 = 1.0;
const VBK_PER_STEP: f64 = 0.0;
const VBK_PER_COPY: f64 = 1.0;

/// Signal length after zero padding to a multiple of 2^(levels+1).
pub(super) fn padded_len(size: usize, levels: usize) -> usize {
    size.next_multiple_of(1 << (levels + 1))
}

fn filters(fmt: FpFormat) -> ([f64; 4], [f64; 4]) {
    let s3 = 3f64.sqrt();
    let d = 4.0 * 2f64.sqrt();
    let h = [(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d];
    let g = [h[3], -h[2], h[1], -h[0]];
    (h.map(|v| quantize(fmt, v)), g.map(|v| quantize(fmt, v)))
}

pub(super) fn build(spec: &KernelSpec) -> (KernelData, Vec<Program>, u32) {
    let levels = spec.dims.levels;
    let n0 = padded_len(spec.dims.size, levels);
    let fmt = spec.variant.format();
    let mut r = rng(spec);
    let mut signal = uniform(&mut r, spec.dims.size, 1.0, fmt);
    signal.resize(n0, 0.0);
    let (h, g) = filters(fmt);
    let mut data = KernelData::default();
    data.push("x", signal);
    data.push("h", h.to_vec());
    data.push("g", g.to_vec());

    let vector = spec.variant.is_vector();
    // words per element pair of storage
    let words = |elems: usize| if vector { elems.div_ceil(2) } else { elems };
    let mut lay = Layout::new();
    // low-pass taps then high-pass taps, one copy per core
    let coefs = lay.alloc_copies(8, spec.n_cores);
    let work = lay.alloc(words(n0 + 2));
    let tmp = lay.alloc(words(n0 / 2));
    let out = lay.alloc(words(n0));

    let programs = (0..spec.n_cores)
        .map(|core| {
            let mut e = Emitter::new(core, fmt);
            let coef = coefs[core];
            let mut out_off = 0;
            for level in 0..levels {
                let n = n0 >> level;
                let half = n / 2;
                if vector {
                    for ip in skewed_chunk(half / 2, spec.n_cores, core, 1) {
                        let i = 2 * ip;
                        for (co, dst) in [(0, tmp.at(ip)), (4, out.at(out_off / 2 + ip))] {
                            let a: Vec<_> = (0..6).map(|j| e.ld(work.at((2 * i + j) / 2))).collect();
                            let ev0 = e.int(&[a[0], a[2]]);
                            let od0 = e.int(&[a[1], a[3]]);
                            let ev1 = e.int(&[a[2], a[4]]);
                            let od1 = e.int(&[a[3], a[5]]);
                            let c: Vec<_> = (0..4).map(|t| e.ld(coef.at(co + t))).collect();
                            let mut v = e.vfp(FpOpKind::Vmul, &[c[0], ev0]);
                            v = e.vfp(FpOpKind::Vfma, &[c[1], od0, v]);
                            v = e.vfp(FpOpKind::Vfma, &[c[2], ev1, v]);
                            v = e.vfp(FpOpKind::Vfma, &[c[3], od1, v]);
                            e.st(dst, v);
                            e.bookkeeping(VBK_PER_STEP);
                        }
                        e.flops(32);
                    }
                } else {
                    for i in skewed_chunk(half, spec.n_cores, core, 1) {
                        let a: Vec<_> = (0..4).map(|t| e.ld(work.at(2 * i + t))).collect();
                        for (co, dst) in [(0, tmp.at(i)), (4, out.at(out_off + i))] {
                            let mut acc = e.int(&[]);
                            for t in 0..4 {
                                let c = e.ld(coef.at(co + t));
                                acc = e.sfp(FpOpKind::Fma, &[c, a[t], acc]);
                            }
                            e.st(dst, acc);
                        }
                        e.bookkeeping(BK_PER_PAIR);
                        e.flops(16);
                    }
                }
                e.barrier(2 * level as u32);
                if core == 0 {
                    // low-pass half becomes the next input, wrapped by two samples
                    let (count, per) = if vector { (half / 2 + 1, VBK_PER_COPY) } else { (half + 2, BK_PER_COPY) };
                    let len = if vector { half / 2 } else { half };
                    for i in 0..count {
                        let v = e.ld(tmp.at(i % len));
                        e.st(work.at(i), v);
                        e.bookkeeping(per);
                    }
                }
                e.barrier(2 * level as u32 + 1);
                out_off += half;
            }
            e.finish()
        })
        .collect();
    (data, programs, lay.bytes())
}

/// Outputs: high-pass bands from the finest level down, then the final
/// low-pass band.
pub(super) fn compute<A: Arith>(ar: &A, spec: &KernelSpec, data: &KernelData) -> Vec<f64> {
    let h: Vec<A::N> = data.get("h").iter().map(|&v| ar.input(v)).collect();
    let g: Vec<A::N> = data.get("g").iter().map(|&v| ar.input(v)).collect();
    let mut a: Vec<A::N> = data.get("x").iter().map(|&v| ar.input(v)).collect();
    let mut out = Vec::new();
    for _ in 0..spec.dims.levels {
        let n = a.len();
        let filt = |c: &[A::N], i: usize| {
            let s = |t: usize| a[(2 * i + t) % n];
            if spec.variant.is_vector() {
                let mut v = ar.mul(c[0], s(0));
                for t in 1..4 {
                    v = ar.fma(c[t], s(t), v);
                }
                v
            } else {
                let mut acc = ar.wide(0.0);
                for t in 0..4 {
                    acc = ar.mac(c[t], s(t), acc);
                }
                ar.narrow(acc)
            }
        };
        let lo: Vec<A::N> = (0..n / 2).map(|i| filt(&h, i)).collect();
        out.extend((0..n / 2).map(|i| ar.n64(filt(&g, i))));
        a = lo;
    }
    out.extend(a.iter().map(|&v| ar.n64(v)));
    out
}

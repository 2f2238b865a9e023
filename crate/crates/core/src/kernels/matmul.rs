//! C = A * B with square operands. Rows of C are split across cores.
//!
//! The packed variant computes two adjacent outputs per step: one load of
//! an A pair (k, k+1), two B row pairs transposed into column pairs by
//! shuffles, and one dot product per output.

use super::arith::Arith;
use super::emit::{chunk, Emitter, Layout};
use super::{rng, uniform, KernelData, KernelSpec};
use crate::isa::{FpOpKind, Program};

const BK_PER_MAC: f64 = 0.5;
const BK_PER_OUT: f64 = 1.0;
const VBK_PER_STEP: f64 = 0.25;
const VBK_PER_OUT: f64 = 2.0;

fn even(n: usize) -> usize {
    n + n % 2
}

pub(super) fn build(spec: &KernelSpec) -> (KernelData, Vec<Program>, u32) {
    let n = spec.dims.size;
    let fmt = spec.variant.format();
    let mut r = rng(spec);
    let mut data = KernelData::default();
    data.push("a", uniform(&mut r, n * n, 1.0, fmt));
    data.push("b", uniform(&mut r, n * n, 1.0, fmt));

    let mut lay = Layout::new();
    let programs = if spec.variant.is_vector() {
        let np = even(n);
        // padded rows put the A rows of different cores in different banks
        let ar = np / 2 + 1;
        let a = lay.alloc(n * ar);
        let b = lay.alloc(np * np / 2);
        let c = lay.alloc(n * np / 2);
        (0..spec.n_cores)
            .map(|core| {
                let mut e = Emitter::new(core, fmt);
                for i in chunk(n, spec.n_cores, core) {
                    for jj in 0..np / 2 {
                        let jp = (jj + core) % (np / 2);
                        let mut acc = [e.int(&[]), e.int(&[])];
                        for kp in 0..np / 2 {
                            let va = e.ld(a.at(i * ar + kp));
                            let b0 = e.ld(b.at(2 * kp * np / 2 + jp));
                            let b1 = e.ld(b.at((2 * kp + 1) * np / 2 + jp));
                            let t0 = e.int(&[b0, b1]);
                            let t1 = e.int(&[b0, b1]);
                            acc[0] = e.vfp(FpOpKind::Vfdotp, &[va, t0, acc[0]]);
                            acc[1] = e.vfp(FpOpKind::Vfdotp, &[va, t1, acc[1]]);
                            e.bookkeeping(VBK_PER_STEP);
                        }
                        let p = e.vfp(FpOpKind::CastPack, &[acc[0], acc[1]]);
                        e.st(c.at(i * np / 2 + jp), p);
                        e.bookkeeping(VBK_PER_OUT);
                        let real = if 2 * jp + 1 < n { 2 } else { 1 };
                        e.flops(real * 2 * n as u64);
                    }
                }
                e.finish()
            })
            .collect()
    } else {
        let a = lay.alloc(n * (n + 1));
        let b = lay.alloc(n * n);
        let c = lay.alloc(n * n);
        (0..spec.n_cores)
            .map(|core| {
                let mut e = Emitter::new(core, fmt);
                for i in chunk(n, spec.n_cores, core) {
                    for jj in 0..n {
                        let j = (jj + 2 * core) % n;
                        let mut acc = e.int(&[]);
                        for k in 0..n {
                            let x = e.ld(a.at(i * (n + 1) + k));
                            let y = e.ld(b.at(k * n + j));
                            acc = e.sfp(FpOpKind::Fma, &[x, y, acc]);
                            e.bookkeeping(BK_PER_MAC);
                        }
                        e.st(c.at(i * n + j), acc);
                        e.bookkeeping(BK_PER_OUT);
                        e.flops(2 * n as u64);
                    }
                }
                e.finish()
            })
            .collect()
    };
    (data, programs, lay.bytes())
}

pub(super) fn compute<A: Arith>(ar: &A, spec: &KernelSpec, data: &KernelData) -> Vec<f64> {
    let n = spec.dims.size;
    let a: Vec<A::N> = data.get("a").iter().map(|&x| ar.input(x)).collect();
    let b: Vec<A::N> = data.get("b").iter().map(|&x| ar.input(x)).collect();
    let zero = ar.input(0.0);
    let at = |m: &[A::N], r: usize, c: usize| if r < n && c < n { m[r * n + c] } else { zero };
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = ar.wide(0.0);
            if spec.variant.is_vector() {
                for kp in 0..even(n) / 2 {
                    let (k0, k1) = (2 * kp, 2 * kp + 1);
                    acc = ar.dot2([at(&a, i, k0), at(&a, i, k1)], [at(&b, k0, j), at(&b, k1, j)], acc);
                }
            } else {
                for k in 0..n {
                    acc = ar.mac(a[i * n + k], b[k * n + j], acc);
                }
            }
            out.push(ar.n64(ar.narrow(acc)));
        }
    }
    out
}

//! Linear support-vector classifier inference:
//! f(x) = bias + sum_v coef_v * <sv_v, x>.
//!
//! The kernel products of all (sample, support vector) pairs are computed in
//! parallel over samples into a binary32 matrix; after a barrier core 0
//! forms the decision values and their signs.

use rand::Rng;

use super::arith::Arith;
use super::emit::{chunk, Emitter, Layout};
use super::{quantize, rng, uniform, KernelData, KernelSpec};
use crate::isa::{FpOpKind, Program};
use crate::tpfloat::FpFormat;

const BK_PER_MAC: f64 = 0.7;
const BK_PER_DOT: f64 = 0.0;
const VBK_PER_STEP: f64 = 1.0;
const VBK_PER_DOT: f64 = 5.0;
const BK_PER_SAMPLE: f64 = 2.0;

pub(super) fn build(spec: &KernelSpec) -> (KernelData, Vec<Program>, u32) {
    let d = &spec.dims;
    let (ns, dim, nv) = (d.size, d.dim, d.support_vectors);
    let fmt = spec.variant.format();
    let mut r = rng(spec);
    let mut data = KernelData::default();
    data.push("sv", uniform(&mut r, nv * dim, 1.0, fmt));
    data.push("x", uniform(&mut r, ns * dim, 1.0, fmt));
    data.push("coef", uniform(&mut r, nv, 1.0, FpFormat::F32));
    data.push("bias", vec![quantize(FpFormat::F32, r.random_range(-0.5..0.5))]);

    let vector = spec.variant.is_vector();
    let row = if vector { dim.div_ceil(2) } else { dim };
    // padded rows keep cores on different banks
    let stride = row + 1;
    let mut lay = Layout::new();
    let svw = lay.alloc(nv * stride);
    let xw = lay.alloc(ns * stride);
    let coef = lay.alloc(nv);
    let bias = lay.alloc(1);
    let km = lay.alloc(ns * nv);
    let out = lay.alloc(ns);

    let programs = (0..spec.n_cores)
        .map(|core| {
            let mut e = Emitter::new(core, fmt);
            for s in chunk(ns, spec.n_cores, core) {
                for vv in 0..nv {
                    let v = (vv + core) % nv;
                    let mut acc = e.int(&[]);
                    for j in 0..row {
                        let a = e.ld(svw.at(v * stride + j));
                        let b = e.ld(xw.at(s * stride + j));
                        if vector {
                            acc = e.vfp(FpOpKind::Vfdotp, &[a, b, acc]);
                            e.bookkeeping(VBK_PER_STEP);
                        } else {
                            acc = e.sfp(FpOpKind::Fma, &[a, b, acc]);
                            e.bookkeeping(BK_PER_MAC);
                        }
                    }
                    e.st(km.at(s * nv + v), acc);
                    e.bookkeeping(if vector { VBK_PER_DOT } else { BK_PER_DOT });
                    e.flops(2 * dim as u64);
                }
            }
            e.barrier(0);
            if core == 0 {
                for s in 0..ns {
                    let mut acc = e.ld(bias.at(0));
                    for v in 0..nv {
                        let c = e.ld(coef.at(v));
                        let k = e.ld(km.at(s * nv + v));
                        acc = e.sfp(FpOpKind::Fma, &[c, k, acc]);
                    }
                    let zero = e.int(&[]);
                    let sign = e.sfp(FpOpKind::Cmp, &[acc, zero]);
                    e.int(&[sign]);
                    e.st(out.at(s), acc);
                    e.bookkeeping(BK_PER_SAMPLE);
                    e.flops(2 * nv as u64);
                }
            }
            e.finish()
        })
        .collect();
    (data, programs, lay.bytes())
}

/// Outputs: the decision value of every sample.
pub(super) fn compute<A: Arith>(ar: &A, spec: &KernelSpec, data: &KernelData) -> Vec<f64> {
    let d = &spec.dims;
    let (ns, dim, nv) = (d.size, d.dim, d.support_vectors);
    let sv: Vec<A::N> = data.get("sv").iter().map(|&v| ar.input(v)).collect();
    let x: Vec<A::N> = data.get("x").iter().map(|&v| ar.input(v)).collect();
    let coef: Vec<A::W> = data.get("coef").iter().map(|&v| ar.wide(v)).collect();
    let bias = ar.wide(data.get("bias")[0]);
    let zero = ar.input(0.0);
    let at = |m: &[A::N], r: usize, j: usize| if j < dim { m[r * dim + j] } else { zero };
    (0..ns)
        .map(|s| {
            let km: Vec<A::W> = (0..nv)
                .map(|v| {
                    let mut acc = ar.wide(0.0);
                    if spec.variant.is_vector() {
                        for j in (0..dim).step_by(2) {
                            acc = ar.dot2([at(&sv, v, j), at(&sv, v, j + 1)], [at(&x, s, j), at(&x, s, j + 1)], acc);
                        }
                    } else {
                        for j in 0..dim {
                            acc = ar.mac(sv[v * dim + j], x[s * dim + j], acc);
                        }
                    }
                    acc
                })
                .collect();
            let mut acc = bias;
            for v in 0..nv {
                acc = ar.wfma(coef[v], km[v], acc);
            }
            ar.w64(acc)
        })
        .collect()
}

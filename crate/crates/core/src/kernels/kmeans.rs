//! K-means clustering for a fixed number of iterations.
//!
//! Each iteration assigns points to the nearest centroid in parallel
//! (squared Euclidean distance, first minimum wins), then core 0 recomputes
//! the centroids as the means of their members. Empty clusters keep their
//! previous centroid. Barriers separate the two steps.

use super::arith::{Arith, Soft};
use super::emit::{chunk, Emitter, Layout};
use super::{quantize, rng, uniform, KernelData, KernelSpec};
use crate::isa::{FpOpKind, Program};
use crate::tpfloat::DivSqrtOp;

const BK_PER_POINT: f64 = 2.0;
const BK_PER_MEMBER: f64 = 1.0;
const VBK_PER_CLUSTER: f64 = 2.0;
const VBK_PER_MEMBER: f64 = 2.0;

fn even(n: usize) -> usize {
    n + n % 2
}

pub(super) fn build(spec: &KernelSpec) -> (KernelData, Vec<Program>, u32) {
    let d = &spec.dims;
    let (np, dim, k) = (d.size, d.dim, d.clusters);
    let fmt = spec.variant.format();
    let mut r = rng(spec);
    let centers = uniform(&mut r, k * dim, 1.0, fmt);
    let noise = uniform(&mut r, np * dim, 0.1, fmt);
    let points: Vec<f64> = (0..np * dim).map(|i| quantize(fmt, centers[(i / dim % k) * dim + i % dim] + noise[i])).collect();
    let init = points[..k.min(np) * dim].iter().copied().chain(std::iter::repeat(0.0)).take(k * dim).collect();
    let mut data = KernelData::default();
    data.push("x", points);
    data.push("c0", init);
    let labels = compute(&Soft { fmt }, spec, &data).1;

    let vector = spec.variant.is_vector();
    // words per point or centroid
    let row = if vector { even(dim) / 2 } else { dim };
    let mut lay = Layout::new();
    let xw = lay.alloc(np * row);
    let cw = lay.alloc(k * row);
    let lw = lay.alloc(np);

    let programs = (0..spec.n_cores)
        .map(|core| {
            let mut e = Emitter::new(core, fmt);
            for (it, lab) in labels.iter().enumerate() {
                for p in chunk(np, spec.n_cores, core) {
                    let xs: Vec<_> = (0..row).map(|j| e.ld(xw.at(p * row + j))).collect();
                    let mut best = None;
                    for c in 0..k {
                        let mut acc = e.int(&[]);
                        for (j, &xv) in xs.iter().enumerate() {
                            let cv = e.ld(cw.at(c * row + j));
                            if vector {
                                let diff = e.vfp(FpOpKind::Vsub, &[xv, cv]);
                                acc = e.vfp(FpOpKind::Vfdotp, &[diff, diff, acc]);
                            } else {
                                let diff = e.sfp(FpOpKind::Sub, &[xv, cv]);
                                acc = e.sfp(FpOpKind::Fma, &[diff, diff, acc]);
                            }
                        }
                        best = Some(match best {
                            None => acc,
                            Some(b) => {
                                let lt = e.sfp(FpOpKind::Cmp, &[acc, b]);
                                e.int(&[lt]);
                                e.int(&[lt, acc, b])
                            }
                        });
                        if vector {
                            e.bookkeeping(VBK_PER_CLUSTER);
                        }
                    }
                    let l = e.int(&best.into_iter().collect::<Vec<_>>());
                    e.st(lw.at(p), l);
                    e.bookkeeping(BK_PER_POINT);
                    e.flops(3 * (k * dim) as u64);
                }
                e.barrier(2 * it as u32);
                if core == 0 {
                    for c in 0..k {
                        let mut sums: Vec<Option<_>> = vec![None; row];
                        let mut count = e.int(&[]);
                        for p in 0..np {
                            let lv = e.ld(lw.at(p));
                            e.int(&[lv]);
                            if lab[p] != c {
                                continue;
                            }
                            count = e.int(&[count]);
                            for (j, s) in sums.iter_mut().enumerate() {
                                let xv = e.ld(xw.at(p * row + j));
                                *s = Some(match *s {
                                    None => xv,
                                    Some(acc) if vector => e.vfp(FpOpKind::Vadd, &[acc, xv]),
                                    Some(acc) => e.sfp(FpOpKind::Add, &[acc, xv]),
                                });
                            }
                            e.bookkeeping(if vector { VBK_PER_MEMBER } else { BK_PER_MEMBER });
                            e.flops(dim as u64);
                        }
                        let cnt = e.sfp(FpOpKind::Convert, &[count]);
                        for (j, s) in sums.into_iter().enumerate() {
                            let s = s.unwrap_or(count);
                            let v = if vector {
                                let lo = e.divsqrt(DivSqrtOp::Div, fmt, &[s, cnt]);
                                let hi = e.divsqrt(DivSqrtOp::Div, fmt, &[s, cnt]);
                                e.int(&[lo, hi])
                            } else {
                                e.divsqrt(DivSqrtOp::Div, fmt, &[s, cnt])
                            };
                            e.st(cw.at(c * row + j), v);
                        }
                        e.flops(dim as u64);
                    }
                }
                e.barrier(2 * it as u32 + 1);
            }
            e.finish()
        })
        .collect();
    (data, programs, lay.bytes())
}

/// Returns the final centroids (row-major) and the labels of every
/// iteration.
pub(super) fn compute<A: Arith>(ar: &A, spec: &KernelSpec, data: &KernelData) -> (Vec<f64>, Vec<Vec<usize>>) {
    let d = &spec.dims;
    let (np, dim, k) = (d.size, d.dim, d.clusters);
    let x: Vec<A::N> = data.get("x").iter().map(|&v| ar.input(v)).collect();
    let mut cent: Vec<A::N> = data.get("c0").iter().map(|&v| ar.input(v)).collect();
    let zero = ar.input(0.0);
    let vector = spec.variant.is_vector();
    let mut all = Vec::with_capacity(d.iters);
    for _ in 0..d.iters {
        let labels: Vec<usize> = (0..np)
            .map(|p| {
                let xp = &x[p * dim..(p + 1) * dim];
                let mut best: Option<(usize, A::W)> = None;
                for c in 0..k {
                    let cp = &cent[c * dim..(c + 1) * dim];
                    let mut acc = ar.wide(0.0);
                    if vector {
                        for j in (0..dim).step_by(2) {
                            let d0 = ar.sub(xp[j], cp[j]);
                            let d1 = if j + 1 < dim { ar.sub(xp[j + 1], cp[j + 1]) } else { zero };
                            acc = ar.dot2([d0, d1], [d0, d1], acc);
                        }
                    } else {
                        for j in 0..dim {
                            let df = ar.sub(xp[j], cp[j]);
                            acc = ar.mac(df, df, acc);
                        }
                    }
                    if best.is_none_or(|(_, b)| ar.wlt(acc, b)) {
                        best = Some((c, acc));
                    }
                }
                best.map_or(0, |(c, _)| c)
            })
            .collect();
        for c in 0..k {
            let mut sums: Option<Vec<A::N>> = None;
            let mut count = 0usize;
            for p in (0..np).filter(|&p| labels[p] == c) {
                count += 1;
                let xp = &x[p * dim..(p + 1) * dim];
                sums = Some(match sums {
                    None => xp.to_vec(),
                    Some(s) => s.iter().zip(xp).map(|(&a, &b)| ar.add(a, b)).collect(),
                });
            }
            if let Some(s) = sums {
                let cnt = ar.input(count as f64);
                for j in 0..dim {
                    cent[c * dim + j] = ar.div(s[j], cnt);
                }
            }
        }
        all.push(labels);
    }
    (cent.iter().map(|&v| ar.n64(v)).collect(), all)
}

//! Recursive filter y[n] = sum_{k=0..Q} b_k x[n-k] + sum_{k=1..P} a_k y[n-k].
//!
//! Scalar: the feed-forward part is computed in parallel into a binary32
//! buffer; after a barrier core 0 runs the recursion over a shifted state
//! buffer.
//!
//! Packed: the filter is rewritten off-line in block form (block length =
//! order, rounded up to even), so that each output of a block is a fixed
//! combination of the block's inputs, the previous inputs and the previous
//! block's outputs. The input combinations run in parallel; core 0 then
//! adds the output feedback block by block.

use super::arith::Arith;
use super::emit::{skewed_chunk, Emitter, Layout};
use super::{quantize, rng, uniform, KernelData, KernelError, KernelSpec};
use crate::isa::{FpOpKind, Program};

const BK_FF: f64 = 8.0;
const BK_REC: f64 = 12.0;
const VBK_FF: f64 = 18.0;
const VBK_REC: f64 = 12.0;

/// Block formulation of a recursive filter. For a block starting at n0 and
/// `i` in `0..L`:
///
/// y[n0+i] = sum_p c_y[i][p-1] y[n0-p]  (p = 1..=P)
///         + sum_q c_x[i][q] x[n0-Q+q]  (q = 0..Q)
///         + sum_j d[i][j] x[n0+j]      (j = 0..=i)
#[derive(Clone, Debug, PartialEq)]
pub struct BlockForm {
    pub block_len: usize,
    pub c_y: Vec<Vec<f64>>,
    pub c_x: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
}

impl BlockForm {
    /// Filter `x` block by block in `f64` (zero initial state).
    pub fn run(&self, x: &[f64]) -> Vec<f64> {
        let l = self.block_len;
        let (p, q) = (self.c_y.first().map_or(0, Vec::len), self.c_x.first().map_or(0, Vec::len));
        let xin = |n: isize| if n >= 0 { x.get(n as usize).copied().unwrap_or(0.0) } else { 0.0 };
        let mut y: Vec<f64> = Vec::with_capacity(x.len().next_multiple_of(l));
        for n0 in (0..x.len()).step_by(l) {
            let yprev = |k: usize| if n0 >= k { y[n0 - k] } else { 0.0 };
            let block: Vec<f64> = (0..l)
                .map(|i| {
                    let mut acc = 0.0;
                    for k in 1..=p {
                        acc += self.c_y[i][k - 1] * yprev(k);
                    }
                    for k in 0..q {
                        acc += self.c_x[i][k] * xin(n0 as isize - q as isize + k as isize);
                    }
                    for j in 0..=i {
                        acc += self.d[i][j] * xin((n0 + j) as isize);
                    }
                    acc
                })
                .collect();
            y.extend(block);
        }
        y.truncate(x.len());
        y
    }
}

/// Schur-Cohn step-down on 1 - sum a_k z^-k: every reflection coefficient
/// must lie strictly inside the unit interval.
fn is_stable(a: &[f64]) -> bool {
    let mut alpha: Vec<f64> = a.iter().map(|v| -v).collect();
    while let Some(&k) = alpha.last() {
        if !k.is_finite() || k.abs() >= 1.0 {
            return false;
        }
        let m = alpha.len();
        let den = 1.0 - k * k;
        alpha = (0..m - 1).map(|i| (alpha[i] - k * alpha[m - 2 - i]) / den).collect();
    }
    true
}

/// Derive the block form with block length `block_len` from the feed-forward
/// taps `b` (b_0..b_Q) and feedback taps `a` (a_1..a_P).
pub fn iir_block_form(b: &[f64], a: &[f64], block_len: usize) -> Result<BlockForm, KernelError> {
    if b.is_empty() || block_len == 0 {
        return Err(KernelError::Size("need at least one feed-forward tap and a positive block length".into()));
    }
    if b.iter().any(|v| !v.is_finite()) || !is_stable(a) {
        return Err(KernelError::UnstableFilter);
    }
    let (p, q, l) = (a.len(), b.len() - 1, block_len);
    // coordinates: y[n0-1..n0-P], then x[n0-Q..n0+L-1]
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(l);
    for i in 0..l {
        let mut row = vec![0.0; p + q + l];
        for (k, &bk) in b.iter().enumerate() {
            row[p + q + i - k] += bk;
        }
        for (k, &ak) in a.iter().enumerate().map(|(k, v)| (k + 1, v)) {
            if k <= i {
                let prev = rows[i - k].clone();
                for (r, v) in row.iter_mut().zip(prev) {
                    *r += ak * v;
                }
            } else {
                row[k - i - 1] += ak;
            }
        }
        rows.push(row);
    }
    Ok(BlockForm {
        block_len: l,
        c_y: rows.iter().map(|r| r[..p].to_vec()).collect(),
        c_x: rows.iter().map(|r| r[p..p + q].to_vec()).collect(),
        d: rows.iter().map(|r| r[p + q..].to_vec()).collect(),
    })
}

/// Stable feedback taps from reflection coefficients in [-0.7, 0.7].
fn stable_feedback(r: &mut impl rand::Rng, order: usize) -> Vec<f64> {
    let mut alpha: Vec<f64> = Vec::new();
    for m in 1..=order {
        let k: f64 = r.random_range(-0.7..=0.7);
        let prev = alpha.clone();
        for i in 0..m - 1 {
            alpha[i] = prev[i] + k * prev[m - 2 - i];
        }
        alpha.push(k);
    }
    alpha.iter().map(|v| -v).collect()
}

fn even(n: usize) -> usize {
    n + n % 2
}

pub(super) fn build(spec: &KernelSpec) -> Result<(KernelData, Vec<Program>, u32), KernelError> {
    let (n, t) = (spec.dims.size, spec.dims.taps);
    let fmt = spec.variant.format();
    let mut r = rng(spec);
    let mut data = KernelData::default();
    let b = uniform(&mut r, t + 1, 0.25, fmt);
    let a: Vec<f64> = stable_feedback(&mut r, t).into_iter().map(|v| quantize(fmt, v)).collect();
    data.push("x", uniform(&mut r, n, 1.0, fmt));

    let mut lay = Layout::new();
    let programs = if spec.variant.is_vector() {
        let l = even(t);
        let (p, q) = (l, l);
        let mut bp = b.clone();
        bp.resize(q + 1, 0.0);
        let mut ap = a.clone();
        ap.resize(p, 0.0);
        let bf = iir_block_form(&bp, &ap, l)?;
        let cx: Vec<f64> = (0..l).flat_map(|i| bf.c_x[i].iter().chain(&bf.d[i]).map(|&v| quantize(fmt, v)).collect::<Vec<_>>()).collect();
        let cy: Vec<f64> = (0..l).flat_map(|i| (0..p).map(|j| quantize(fmt, bf.c_y[i][p - 1 - j])).collect::<Vec<_>>()).collect();
        if cx.iter().chain(&cy).any(|v| !v.is_finite()) {
            return Err(KernelError::UnstableFilter);
        }
        data.push("cx", cx);
        data.push("cy", cy);
        let np = n.next_multiple_of(l);
        let row = q + l;
        let cxs = lay.alloc_copies(l * row / 2, spec.n_cores);
        let cyw = lay.alloc(l * p / 2);
        let xp = lay.alloc((q + np) / 2);
        let v = lay.alloc(np);
        let yp = lay.alloc((p + np) / 2);
        (0..spec.n_cores)
            .map(|core| {
                let mut e = Emitter::new(core, fmt);
                let cxw = cxs[core];
                for m in skewed_chunk(np, spec.n_cores, core, 1) {
                    let (i, n0) = (m % l, m - m % l);
                    let mut acc = e.int(&[]);
                    for k in 0..(q + i + 1).div_ceil(2) {
                        let c = e.ld(cxw.at(i * row / 2 + k));
                        let xv = e.ld(xp.at(n0 / 2 + k));
                        acc = e.vfp(FpOpKind::Vfdotp, &[c, xv, acc]);
                    }
                    e.st(v.at(m), acc);
                    e.bookkeeping(VBK_FF);
                    if m < n {
                        e.flops(2 * (t as u64 + 1));
                    }
                }
                e.barrier(0);
                if core == 0 {
                    for n0 in (0..np).step_by(l) {
                        let mut ys = Vec::with_capacity(l);
                        for i in 0..l {
                            let mut acc = e.ld(v.at(n0 + i));
                            for k in 0..p / 2 {
                                let c = e.ld(cyw.at(i * p / 2 + k));
                                let yv = e.ld(yp.at(n0 / 2 + k));
                                acc = e.vfp(FpOpKind::Vfdotp, &[c, yv, acc]);
                            }
                            ys.push(acc);
                            e.bookkeeping(VBK_REC);
                            if n0 + i < n {
                                e.flops(2 * t as u64);
                            }
                        }
                        for i in (0..l).step_by(2) {
                            let pk = e.vfp(FpOpKind::CastPack, &[ys[i], ys[i + 1]]);
                            e.st(yp.at((p + n0 + i) / 2), pk);
                        }
                    }
                }
                e.finish()
            })
            .collect()
    } else {
        let (p, q) = (t, t);
        let bs = lay.alloc_copies(q + 1, spec.n_cores);
        let aw = lay.alloc(p);
        let xp = lay.alloc(q + n);
        let w = lay.alloc(n);
        let s = lay.alloc(p);
        let y = lay.alloc(n);
        (0..spec.n_cores)
            .map(|core| {
                let mut e = Emitter::new(core, fmt);
                let bw = bs[core];
                for m in skewed_chunk(n, spec.n_cores, core, 2) {
                    let mut acc = e.int(&[]);
                    for k in 0..=q {
                        let c = e.ld(bw.at(k));
                        let xv = e.ld(xp.at(q + m - k));
                        acc = e.sfp(FpOpKind::Fma, &[c, xv, acc]);
                    }
                    e.st(w.at(m), acc);
                    e.bookkeeping(BK_FF);
                    e.flops(2 * (q as u64 + 1));
                }
                e.barrier(0);
                if core == 0 {
                    for m in 0..n {
                        let mut acc = e.ld(w.at(m));
                        for k in 0..p {
                            let c = e.ld(aw.at(k));
                            let sv = e.ld(s.at(k));
                            acc = e.sfp(FpOpKind::Fma, &[c, sv, acc]);
                        }
                        for j in (1..p).rev() {
                            let sv = e.ld(s.at(j - 1));
                            e.st(s.at(j), sv);
                        }
                        if p > 0 {
                            e.st(s.at(0), acc);
                        }
                        e.st(y.at(m), acc);
                        e.bookkeeping(BK_REC);
                        e.flops(2 * p as u64);
                    }
                }
                e.finish()
            })
            .collect()
    };
    data.push("b", b);
    data.push("a", a);
    Ok((data, programs, lay.bytes()))
}

pub(super) fn compute<A: Arith>(ar: &A, spec: &KernelSpec, data: &KernelData) -> Vec<f64> {
    let (n, t) = (spec.dims.size, spec.dims.taps);
    let x: Vec<A::N> = data.get("x").iter().map(|&v| ar.input(v)).collect();
    let zero = ar.input(0.0);
    if spec.variant.is_vector() {
        let l = even(t);
        let (p, q) = (l, l);
        let np = n.next_multiple_of(l);
        let cx: Vec<A::N> = data.get("cx").iter().map(|&v| ar.input(v)).collect();
        let cy: Vec<A::N> = data.get("cy").iter().map(|&v| ar.input(v)).collect();
        let row = q + l;
        let mut xp = vec![zero; q + np + 2];
        xp[q..q + n].copy_from_slice(&x);
        let cxe = |i: usize, j: usize| if j < row { cx[i * row + j] } else { zero };
        let v: Vec<A::W> = (0..np)
            .map(|m| {
                let (i, n0) = (m % l, m - m % l);
                let mut acc = ar.wide(0.0);
                for k in 0..(q + i + 1).div_ceil(2) {
                    acc = ar.dot2([cxe(i, 2 * k), cxe(i, 2 * k + 1)], [xp[n0 + 2 * k], xp[n0 + 2 * k + 1]], acc);
                }
                acc
            })
            .collect();
        let mut yp = vec![zero; p + np];
        for n0 in (0..np).step_by(l) {
            let block: Vec<A::N> = (0..l)
                .map(|i| {
                    let mut acc = v[n0 + i];
                    for k in 0..p / 2 {
                        let c = [cy[i * p + 2 * k], cy[i * p + 2 * k + 1]];
                        acc = ar.dot2(c, [yp[n0 + 2 * k], yp[n0 + 2 * k + 1]], acc);
                    }
                    ar.narrow(acc)
                })
                .collect();
            yp[p + n0..p + n0 + l].copy_from_slice(&block);
        }
        yp[p..p + n].iter().map(|&v| ar.n64(v)).collect()
    } else {
        let b: Vec<A::N> = data.get("b").iter().map(|&v| ar.input(v)).collect();
        let a: Vec<A::N> = data.get("a").iter().map(|&v| ar.input(v)).collect();
        let xin = |m: usize, k: usize| if m >= k { x[m - k] } else { zero };
        let w: Vec<A::W> = (0..n)
            .map(|m| {
                let mut acc = ar.wide(0.0);
                for (k, &bk) in b.iter().enumerate() {
                    acc = ar.mac(bk, xin(m, k), acc);
                }
                acc
            })
            .collect();
        let mut y: Vec<A::N> = Vec::with_capacity(n);
        for m in 0..n {
            let mut acc = w[m];
            for (k, &ak) in a.iter().enumerate() {
                acc = ar.mac(ak, if m > k { y[m - k - 1] } else { zero }, acc);
            }
            y.push(ar.narrow(acc));
        }
        y.iter().map(|&v| ar.n64(v)).collect()
    }
}

//! Radix-2 decimation-in-frequency FFT with a final bit-reversal pass.
//!
//! Butterflies of one stage are split across cores, with a barrier after
//! every stage. The scalar variant keeps real and imaginary parts in
//! separate words; the packed variant holds one complex value per word and
//! forms the twiddle product with two dot products and a cast-and-pack.

use std::f64::consts::PI;

use super::arith::{Arith, Soft};
use super::emit::{chunk, skewed_chunk, Emitter, Layout};
use super::{quantize, rng, uniform, KernelData, KernelError, KernelSpec};
use crate::isa::{FpOpKind, Program};
use crate::tpfloat::FpFormat;

const BK_PER_BFLY: f64 = 3.5;
const BK_PER_ELEM: f64 = 1.0;
const VBK_PER_BFLY: f64 = 5.0;
const VBK_PER_ELEM: f64 = 1.0;

fn bit_reverse(m: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        m.reverse_bits() >> (usize::BITS - bits)
    }
}

/// (wr, wi) with W^k = exp(-2*pi*i*k/n), rounded to `fmt`.
fn twiddles(n: usize, fmt: FpFormat) -> Vec<(f64, f64)> {
    (0..n / 2)
        .map(|k| {
            let a = -2.0 * PI * k as f64 / n as f64;
            (quantize(fmt, a.cos()), quantize(fmt, a.sin()))
        })
        .collect()
}

/// All butterflies of every stage, then the reordering. `vector` selects
/// the packed arithmetic (16-bit add/sub, widening dot products).
fn dif<A: Arith>(ar: &A, mut x: Vec<(A::N, A::N)>, tw: &[(f64, f64)], vector: bool) -> Vec<(A::N, A::N)> {
    let n = x.len();
    let bits = n.trailing_zeros();
    let tw: Vec<(A::N, A::N, A::N)> = tw.iter().map(|&(r, i)| (ar.input(r), ar.input(i), ar.input(-i))).collect();
    let zero = ar.wide(0.0);
    let mut h = n / 2;
    while h >= 1 {
        for b in 0..n / 2 {
            let (g, j) = (b / h, b % h);
            let i = g * 2 * h + j;
            let (a, c) = (x[i], x[i + h]);
            let (wr, wi, nwi) = tw[j * (n / (2 * h))];
            let s = (ar.add(a.0, c.0), ar.add(a.1, c.1));
            let d = (ar.sub(a.0, c.0), ar.sub(a.1, c.1));
            let p = if vector {
                let re = ar.dot2([d.0, d.1], [wr, nwi], zero);
                let im = ar.dot2([d.0, d.1], [wi, wr], zero);
                (ar.narrow(re), ar.narrow(im))
            } else {
                (ar.fma(d.1, nwi, ar.mul(d.0, wr)), ar.fma(d.1, wr, ar.mul(d.0, wi)))
            };
            x[i] = s;
            x[i + h] = p;
        }
        h /= 2;
    }
    let mut y = x.clone();
    for (m, v) in x.into_iter().enumerate() {
        y[bit_reverse(m, bits)] = v;
    }
    y
}

/// Transform `x` with the soft-float datapath in `fmt`: binary32 uses the
/// scalar butterfly, 16-bit formats the packed one.
pub fn fft_radix2_dif(x: &[(f64, f64)], fmt: FpFormat) -> Result<Vec<(f64, f64)>, KernelError> {
    let n = x.len();
    if !n.is_power_of_two() {
        return Err(KernelError::NotPowerOfTwo(n));
    }
    let ar = Soft { fmt };
    let input = x.iter().map(|&(r, i)| (ar.input(r), ar.input(i))).collect();
    let y = dif(&ar, input, &twiddles(n, fmt), fmt != FpFormat::F32);
    Ok(y.into_iter().map(|(r, i)| (ar.n64(r), ar.n64(i))).collect())
}

pub(super) fn build(spec: &KernelSpec) -> Result<(KernelData, Vec<Program>, u32), KernelError> {
    let n = spec.dims.size.next_power_of_two();
    if n < 2 {
        return Err(KernelError::Size("fft needs at least 2 points".into()));
    }
    let bits = n.trailing_zeros();
    let fmt = spec.variant.format();
    let mut r = rng(spec);
    let mut data = KernelData::default();
    data.push("x", uniform(&mut r, 2 * n, 1.0, fmt));
    let tw = twiddles(n, fmt);
    data.push("wr", tw.iter().map(|t| t.0).collect());
    data.push("wi", tw.iter().map(|t| t.1).collect());

    let vector = spec.variant.is_vector();
    let per = if vector { 1 } else { 2 };
    let mut lay = Layout::new();
    let x = lay.alloc(per * n);
    let w = lay.alloc(if vector { n } else { 3 * n / 2 });
    let rev = lay.alloc(n);
    let out = lay.alloc(per * n);

    let programs = (0..spec.n_cores)
        .map(|core| {
            let mut e = Emitter::new(core, fmt);
            let zero = vector.then(|| e.int(&[]));
            for s in 0..bits {
                let h = n >> (s + 1);
                for b in skewed_chunk(n / 2, spec.n_cores, core, 3) {
                    let (g, j) = (b / h, b % h);
                    let i = g * 2 * h + j;
                    let k = j * (n / (2 * h));
                    if let Some(zero) = zero {
                        let a = e.ld(x.at(i));
                        let c = e.ld(x.at(i + h));
                        let sum = e.vfp(FpOpKind::Vadd, &[a, c]);
                        let d = e.vfp(FpOpKind::Vsub, &[a, c]);
                        e.st(x.at(i), sum);
                        let w1 = e.ld(w.at(2 * k));
                        let w2 = e.ld(w.at(2 * k + 1));
                        let re = e.vfp(FpOpKind::Vfdotp, &[d, w1, zero]);
                        let im = e.vfp(FpOpKind::Vfdotp, &[d, w2, zero]);
                        let p = e.vfp(FpOpKind::CastPack, &[re, im]);
                        e.st(x.at(i + h), p);
                        e.bookkeeping(VBK_PER_BFLY);
                    } else {
                        let ar = e.ld(x.at(2 * i));
                        let ai = e.ld(x.at(2 * i + 1));
                        let br = e.ld(x.at(2 * (i + h)));
                        let bi = e.ld(x.at(2 * (i + h) + 1));
                        let sr = e.sfp(FpOpKind::Add, &[ar, br]);
                        let si = e.sfp(FpOpKind::Add, &[ai, bi]);
                        let dr = e.sfp(FpOpKind::Sub, &[ar, br]);
                        let di = e.sfp(FpOpKind::Sub, &[ai, bi]);
                        e.st(x.at(2 * i), sr);
                        e.st(x.at(2 * i + 1), si);
                        let wr = e.ld(w.at(3 * k));
                        let wi = e.ld(w.at(3 * k + 1));
                        let nwi = e.ld(w.at(3 * k + 2));
                        let t = e.sfp(FpOpKind::Mul, &[dr, wr]);
                        let re = e.sfp(FpOpKind::Fma, &[di, nwi, t]);
                        let t2 = e.sfp(FpOpKind::Mul, &[dr, wi]);
                        let im = e.sfp(FpOpKind::Fma, &[di, wr, t2]);
                        e.st(x.at(2 * (i + h)), re);
                        e.st(x.at(2 * (i + h) + 1), im);
                        e.bookkeeping(BK_PER_BFLY);
                    }
                    e.flops(10);
                }
                e.barrier(s);
            }
            for m in chunk(n, spec.n_cores, core) {
                // the store address comes from the loaded index
                let idx = e.ld(rev.at(m));
                e.int(&[idx]);
                let dst = bit_reverse(m, bits);
                if vector {
                    let v = e.ld(x.at(m));
                    e.st(out.at(dst), v);
                    e.bookkeeping(VBK_PER_ELEM);
                } else {
                    let re = e.ld(x.at(2 * m));
                    let im = e.ld(x.at(2 * m + 1));
                    e.st(out.at(2 * dst), re);
                    e.st(out.at(2 * dst + 1), im);
                    e.bookkeeping(BK_PER_ELEM);
                }
            }
            e.finish()
        })
        .collect();
    Ok((data, programs, lay.bytes()))
}

/// Outputs: interleaved (re, im) of each bin in natural order.
pub(super) fn compute<A: Arith>(ar: &A, spec: &KernelSpec, data: &KernelData) -> Vec<f64> {
    let xs = data.get("x");
    let x = xs.chunks(2).map(|c| (ar.input(c[0]), ar.input(c[1]))).collect();
    let tw: Vec<(f64, f64)> = data.get("wr").iter().zip(data.get("wi")).map(|(&r, &i)| (r, i)).collect();
    dif(ar, x, &tw, spec.variant.is_vector()).into_iter().flat_map(|(r, i)| [ar.n64(r), ar.n64(i)]).collect()
}

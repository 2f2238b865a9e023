//! Arbitrary-precision reference arithmetic.
//!
//! Values are decoded into exact dyadic rationals `mant * 2^exp` with
//! big-integer mantissas, combined exactly, and rounded once to the target
//! format. Division and square root compute enough quotient/root bits and
//! fold any remainder into a half-unit sticky digit. Nothing here shares
//! code with the production datapath in [`super::soft`]; it exists to check
//! it.

use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Signed, Zero};

use super::format::FpFormat;
use super::soft::CmpRel;

#[derive(Clone, Debug)]
enum Exact {
    Nan,
    Inf(bool),
    Zero(bool),
    /// nonzero signed mantissa times a power of two
    Num(BigInt, i64),
}

struct Layout {
    frac: i64,
    exp_bits: u32,
    bias: i64,
}

fn layout(fmt: FpFormat) -> Layout {
    let exp_bits = fmt.exp_bits();
    Layout { frac: fmt.sig_bits_stored() as i64, exp_bits, bias: (1i64 << (exp_bits - 1)) - 1 }
}

fn decode(fmt: FpFormat, bits: u32) -> Exact {
    let l = layout(fmt);
    let neg = (bits >> (l.frac as u32 + l.exp_bits)) & 1 == 1;
    let exp_all_ones = (1u32 << l.exp_bits) - 1;
    let exp_field = (bits >> l.frac) & exp_all_ones;
    let frac = bits & ((1u32 << l.frac) - 1);
    if exp_field == exp_all_ones {
        return if frac == 0 { Exact::Inf(neg) } else { Exact::Nan };
    }
    if exp_field == 0 && frac == 0 {
        return Exact::Zero(neg);
    }
    let (m, e) = if exp_field == 0 {
        (frac as u64, 1 - l.bias - l.frac)
    } else {
        ((frac as u64) + (1u64 << l.frac), exp_field as i64 - l.bias - l.frac)
    };
    let mant = BigInt::from(m);
    Exact::Num(if neg { -mant } else { mant }, e)
}

fn nan(fmt: FpFormat) -> u32 {
    let l = layout(fmt);
    (((1u32 << l.exp_bits) - 1) << l.frac) | (1u32 << (l.frac - 1))
}

fn inf(fmt: FpFormat, neg: bool) -> u32 {
    let l = layout(fmt);
    (((1u32 << l.exp_bits) - 1) << l.frac) | sign_bit(fmt, neg)
}

fn sign_bit(fmt: FpFormat, neg: bool) -> u32 {
    if neg {
        1u32 << (fmt.width() - 1)
    } else {
        0
    }
}

/// Round a nonzero dyadic value to `fmt`, nearest-even.
fn round(fmt: FpFormat, mant: &BigInt, exp: i64) -> u32 {
    let l = layout(fmt);
    let neg = mant.is_negative();
    let m: BigUint = mant.magnitude().clone();
    let precision = l.frac + 1;
    let min_quantum = 1 - l.bias - l.frac;
    let top = exp + m.bits() as i64 - 1;
    let mut quantum = (top - (precision - 1)).max(min_quantum);
    let mut n = if quantum <= exp {
        m << (exp - quantum) as usize
    } else {
        let k = (quantum - exp) as usize;
        let floor = &m >> k;
        let rem = &m - (&floor << k);
        let half = BigUint::one() << (k - 1);
        match rem.cmp(&half) {
            Ordering::Greater => floor + 1u32,
            Ordering::Less => floor,
            Ordering::Equal if floor.bit(0) => floor + 1u32,
            Ordering::Equal => floor,
        }
    };
    if n == BigUint::one() << precision as usize {
        n >>= 1usize;
        quantum += 1;
    }
    if n.is_zero() {
        return sign_bit(fmt, neg);
    }
    let hidden = BigUint::one() << l.frac as usize;
    if n >= hidden {
        let biased = quantum + l.frac + l.bias;
        if biased >= (1i64 << l.exp_bits) - 1 {
            return inf(fmt, neg);
        }
        let frac: u32 = (&n - &hidden).try_into().expect("fraction fits");
        sign_bit(fmt, neg) | (biased as u32) << l.frac | frac
    } else {
        let frac: u32 = n.try_into().expect("subnormal fits");
        sign_bit(fmt, neg) | frac
    }
}

fn round_exact(fmt: FpFormat, x: &Exact) -> u32 {
    match x {
        Exact::Nan => nan(fmt),
        Exact::Inf(neg) => inf(fmt, *neg),
        Exact::Zero(neg) => sign_bit(fmt, *neg),
        Exact::Num(m, e) => round(fmt, m, *e),
    }
}

fn exact_sum(am: &BigInt, ae: i64, bm: &BigInt, be: i64) -> Option<(BigInt, i64)> {
    let e = ae.min(be);
    let s = (am << (ae - e) as usize) + (bm << (be - e) as usize);
    if s.is_zero() {
        None
    } else {
        Some((s, e))
    }
}

fn is_neg(x: &Exact) -> bool {
    match x {
        Exact::Inf(n) | Exact::Zero(n) => *n,
        Exact::Num(m, _) => m.is_negative(),
        Exact::Nan => false,
    }
}

fn add_exact(fmt: FpFormat, x: Exact, y: Exact) -> u32 {
    use Exact::*;
    match (&x, &y) {
        (Nan, _) | (_, Nan) => nan(fmt),
        (Inf(a), Inf(b)) if a != b => nan(fmt),
        (Inf(a), _) => inf(fmt, *a),
        (_, Inf(b)) => inf(fmt, *b),
        (Zero(a), Zero(b)) => sign_bit(fmt, *a && *b),
        (Zero(_), _) => round_exact(fmt, &y),
        (_, Zero(_)) => round_exact(fmt, &x),
        (Num(am, ae), Num(bm, be)) => match exact_sum(am, *ae, bm, *be) {
            Some((m, e)) => round(fmt, &m, e),
            None => sign_bit(fmt, false),
        },
    }
}

fn negate(x: Exact) -> Exact {
    match x {
        Exact::Inf(n) => Exact::Inf(!n),
        Exact::Zero(n) => Exact::Zero(!n),
        Exact::Num(m, e) => Exact::Num(-m, e),
        Exact::Nan => Exact::Nan,
    }
}

fn mul_exact(x: &Exact, y: &Exact) -> Exact {
    use Exact::*;
    let neg = is_neg(x) != is_neg(y);
    match (x, y) {
        (Nan, _) | (_, Nan) => Nan,
        (Inf(_), Zero(_)) | (Zero(_), Inf(_)) => Nan,
        (Inf(_), _) | (_, Inf(_)) => Inf(neg),
        (Zero(_), _) | (_, Zero(_)) => Zero(neg),
        (Num(am, ae), Num(bm, be)) => Num(am * bm, ae + be),
    }
}

pub fn add(fmt: FpFormat, a: u32, b: u32) -> u32 {
    add_exact(fmt, decode(fmt, a), decode(fmt, b))
}

pub fn sub(fmt: FpFormat, a: u32, b: u32) -> u32 {
    add_exact(fmt, decode(fmt, a), negate(decode(fmt, b)))
}

pub fn mul(fmt: FpFormat, a: u32, b: u32) -> u32 {
    round_exact(fmt, &mul_exact(&decode(fmt, a), &decode(fmt, b)))
}

pub fn fma(fmt: FpFormat, a: u32, b: u32, c: u32) -> u32 {
    let c = decode(fmt, c);
    if matches!(c, Exact::Nan) {
        return nan(fmt);
    }
    add_exact(fmt, mul_exact(&decode(fmt, a), &decode(fmt, b)), c)
}

pub fn div(fmt: FpFormat, a: u32, b: u32) -> u32 {
    use Exact::*;
    let (x, y) = (decode(fmt, a), decode(fmt, b));
    let neg = is_neg(&x) != is_neg(&y);
    match (&x, &y) {
        (Nan, _) | (_, Nan) | (Inf(_), Inf(_)) | (Zero(_), Zero(_)) => nan(fmt),
        (Inf(_), _) | (_, Zero(_)) => inf(fmt, neg),
        (Zero(_), _) | (_, Inf(_)) => sign_bit(fmt, neg),
        (Num(am, ae), Num(bm, be)) => {
            let precision = fmt.precision() as u64;
            let k = (precision + 4 + bm.magnitude().bits()) as usize;
            let num = am.magnitude() << k;
            let q = &num / bm.magnitude();
            let r = &num % bm.magnitude();
            let (mant, exp) = if r.is_zero() {
                (q, ae - be - k as i64)
            } else {
                ((q << 1usize) + 1u32, ae - be - k as i64 - 1)
            };
            let sign = if neg { Sign::Minus } else { Sign::Plus };
            round(fmt, &BigInt::from_biguint(sign, mant), exp)
        }
    }
}

pub fn sqrt(fmt: FpFormat, a: u32) -> u32 {
    match decode(fmt, a) {
        Exact::Nan => nan(fmt),
        Exact::Zero(neg) => sign_bit(fmt, neg),
        Exact::Inf(true) => nan(fmt),
        Exact::Inf(false) => inf(fmt, false),
        Exact::Num(m, _) if m.is_negative() => nan(fmt),
        Exact::Num(m, e) => {
            let j = fmt.precision() as i64 + 4;
            let odd = e.rem_euclid(2);
            let scaled = m.magnitude() << (2 * j + odd) as usize;
            let root_exp = (e - odd) / 2 - j;
            let r = scaled.sqrt();
            let (mant, exp) = if &r * &r == scaled {
                (r, root_exp)
            } else {
                ((r << 1usize) + 1u32, root_exp - 1)
            };
            round(fmt, &BigInt::from_biguint(Sign::Plus, mant), exp)
        }
    }
}

pub fn convert(src: FpFormat, bits: u32, dst: FpFormat) -> u32 {
    round_exact(dst, &decode(src, bits))
}

pub fn compare(fmt: FpFormat, rel: CmpRel, a: u32, b: u32) -> bool {
    let (x, y) = (decode(fmt, a), decode(fmt, b));
    let ord = match (&x, &y) {
        (Exact::Nan, _) | (_, Exact::Nan) => return false,
        _ => cmp_exact(&x, &y),
    };
    match rel {
        CmpRel::Eq => ord == Ordering::Equal,
        CmpRel::Lt => ord == Ordering::Less,
        CmpRel::Le => ord != Ordering::Greater,
    }
}

fn cmp_exact(x: &Exact, y: &Exact) -> Ordering {
    // map to (class rank, value) with infinities at the ends
    let rank = |v: &Exact| match v {
        Exact::Inf(true) => -1,
        Exact::Inf(false) => 1,
        _ => 0,
    };
    match rank(x).cmp(&rank(y)) {
        Ordering::Equal if rank(x) != 0 => Ordering::Equal,
        Ordering::Equal => {
            let as_num = |v: &Exact| match v {
                Exact::Num(m, e) => (m.clone(), *e),
                _ => (BigInt::zero(), 0),
            };
            let (am, ae) = as_num(x);
            let (bm, be) = as_num(y);
            let e = ae.min(be);
            (am << (ae - e) as usize).cmp(&(bm << (be - e) as usize))
        }
        o => o,
    }
}

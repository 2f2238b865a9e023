//! Raw-bit soft-float datapath.
//!
//! Every operation decodes its operands into an exact `sig * 2^exp` form,
//! computes the exact (or sticky-jammed) result in 128-bit integers and
//! rounds once to the destination format with round-to-nearest-even.
//! Produced NaNs are always the canonical quiet NaN of the destination.

use super::format::FpFormat;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Class {
    Zero,
    Finite,
    Inf,
    Nan,
}

/// Decoded operand. For `Finite` the value is `(-1)^sign * sig * 2^exp`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Unpacked {
    pub sign: bool,
    pub class: Class,
    pub sig: u64,
    pub exp: i32,
}

impl Unpacked {
    fn special(sign: bool, class: Class) -> Self {
        Unpacked { sign, class, sig: 0, exp: 0 }
    }
}

pub(crate) fn unpack(fmt: FpFormat, bits: u32) -> Unpacked {
    let frac_bits = fmt.sig_bits_stored();
    let sign = bits & fmt.sign_mask() != 0;
    let exp_field = (bits >> frac_bits) & fmt.exp_field_max();
    let frac = bits & fmt.frac_mask();
    let min_quantum = 1 - fmt.bias() - frac_bits as i32;
    if exp_field == fmt.exp_field_max() {
        let class = if frac == 0 { Class::Inf } else { Class::Nan };
        Unpacked::special(sign, class)
    } else if exp_field == 0 {
        if frac == 0 {
            Unpacked::special(sign, Class::Zero)
        } else {
            Unpacked { sign, class: Class::Finite, sig: frac as u64, exp: min_quantum }
        }
    } else {
        Unpacked {
            sign,
            class: Class::Finite,
            sig: (frac | (1 << frac_bits)) as u64,
            exp: exp_field as i32 - fmt.bias() - frac_bits as i32,
        }
    }
}

/// Round `(-1)^sign * (sig + sticky*eps) * 2^exp` to `fmt`.
///
/// `sticky` marks a nonzero remainder strictly below the last bit of `sig`;
/// when it is set `sig` must carry at least two bits beyond the target
/// precision so the remainder never reaches the rounding position.
pub(crate) fn round_pack(fmt: FpFormat, sign: bool, sig: u128, exp: i32, sticky: bool) -> u32 {
    if sig == 0 {
        debug_assert!(!sticky);
        return fmt.zero(sign);
    }
    let precision = fmt.precision() as i32;
    let frac_bits = fmt.sig_bits_stored() as i32;
    let min_quantum = 1 - fmt.bias() - frac_bits;
    let msb = 127 - sig.leading_zeros() as i32;
    let mut quantum = (exp + msb - (precision - 1)).max(min_quantum);
    let shift = quantum - exp;

    let mut q: u128 = if shift <= 0 {
        debug_assert!(!sticky, "sticky result without guard bits");
        sig << (-shift) as u32
    } else if shift > msb + 1 {
        // below half of the smallest quantum: rounds to zero
        0
    } else {
        let kept = sig >> shift as u32;
        let rem = sig & ((1u128 << shift as u32) - 1);
        let half = 1u128 << (shift - 1) as u32;
        let up = rem > half || (rem == half && (sticky || kept & 1 == 1));
        kept + up as u128
    };

    if q == 1u128 << precision {
        q >>= 1;
        quantum += 1;
    }
    if q == 0 {
        return fmt.zero(sign);
    }
    let sign_bits = fmt.zero(sign);
    if q >= 1u128 << frac_bits {
        let biased = quantum + frac_bits + fmt.bias();
        if biased >= fmt.exp_field_max() as i32 {
            return fmt.infinity(sign);
        }
        sign_bits | ((biased as u32) << frac_bits) | (q as u32 & fmt.frac_mask())
    } else {
        debug_assert_eq!(quantum, min_quantum);
        sign_bits | q as u32
    }
}

// Alignment cap for exact addition. Operands carry at most 48 significant
// bits, so the shifted one stays within 124 bits. An addend more than CAP
// binades below the other only affects rounding as a sticky contribution.
const ADD_ALIGN_CAP: i32 = 76;

fn add_finite(out: FpFormat, x: Unpacked, y: Unpacked) -> u32 {
    let (hi, lo) = if x.exp >= y.exp { (x, y) } else { (y, x) };
    let mut diff = hi.exp - lo.exp;
    let mut lo_sig = lo.sig as u128;
    if diff > ADD_ALIGN_CAP {
        lo_sig = 1;
        diff = ADD_ALIGN_CAP;
    }
    let hi_sig = (hi.sig as u128) << diff as u32;
    let exp = hi.exp - diff;
    if hi.sign == lo.sign {
        round_pack(out, hi.sign, hi_sig + lo_sig, exp, false)
    } else if hi_sig > lo_sig {
        round_pack(out, hi.sign, hi_sig - lo_sig, exp, false)
    } else if lo_sig > hi_sig {
        round_pack(out, lo.sign, lo_sig - hi_sig, exp, false)
    } else {
        out.zero(false)
    }
}

/// `x + y` rounded to `out`; the operands may come from any format (or be
/// an exact product) since only their decoded values are used.
fn add_unpacked(out: FpFormat, x: Unpacked, y: Unpacked) -> u32 {
    use Class::*;
    match (x.class, y.class) {
        (Nan, _) | (_, Nan) => out.canonical_nan(),
        (Inf, Inf) if x.sign != y.sign => out.canonical_nan(),
        (Inf, _) => out.infinity(x.sign),
        (_, Inf) => out.infinity(y.sign),
        (Zero, Zero) => out.zero(x.sign && y.sign),
        (Zero, Finite) => round_pack(out, y.sign, y.sig as u128, y.exp, false),
        (Finite, Zero) => round_pack(out, x.sign, x.sig as u128, x.exp, false),
        (Finite, Finite) => add_finite(out, x, y),
    }
}

/// Exact product of two decoded operands (significands up to 24 bits).
fn product(a: Unpacked, b: Unpacked) -> Unpacked {
    use Class::*;
    let sign = a.sign != b.sign;
    match (a.class, b.class) {
        (Nan, _) | (_, Nan) => Unpacked::special(false, Nan),
        (Inf, Zero) | (Zero, Inf) => Unpacked::special(false, Nan),
        (Inf, _) | (_, Inf) => Unpacked::special(sign, Inf),
        (Zero, _) | (_, Zero) => Unpacked::special(sign, Zero),
        (Finite, Finite) => Unpacked { sign, class: Finite, sig: a.sig * b.sig, exp: a.exp + b.exp },
    }
}

pub fn add(fmt: FpFormat, a: u32, b: u32) -> u32 {
    add_unpacked(fmt, unpack(fmt, a), unpack(fmt, b))
}

pub fn sub(fmt: FpFormat, a: u32, b: u32) -> u32 {
    let mut y = unpack(fmt, b);
    y.sign = !y.sign;
    add_unpacked(fmt, unpack(fmt, a), y)
}

pub fn mul(fmt: FpFormat, a: u32, b: u32) -> u32 {
    let p = product(unpack(fmt, a), unpack(fmt, b));
    match p.class {
        Class::Nan => fmt.canonical_nan(),
        Class::Inf => fmt.infinity(p.sign),
        Class::Zero => fmt.zero(p.sign),
        Class::Finite => round_pack(fmt, p.sign, p.sig as u128, p.exp, false),
    }
}

/// Fused `a*b + c` of decoded operands, rounded once to `out`.
pub(crate) fn fused(out: FpFormat, a: Unpacked, b: Unpacked, c: Unpacked) -> u32 {
    if c.class == Class::Nan {
        return out.canonical_nan();
    }
    add_unpacked(out, product(a, b), c)
}

pub fn fma(fmt: FpFormat, a: u32, b: u32, c: u32) -> u32 {
    fused(fmt, unpack(fmt, a), unpack(fmt, b), unpack(fmt, c))
}

/// `a16*b16 + c32` with 16-bit multiplicands and a binary32 addend/result.
pub fn fma_widen(src: FpFormat, a: u32, b: u32, c: u32) -> u32 {
    debug_assert!(src.is_16bit());
    fused(FpFormat::F32, unpack(src, a), unpack(src, b), unpack(FpFormat::F32, c))
}

pub fn div(fmt: FpFormat, a: u32, b: u32) -> u32 {
    use Class::*;
    let x = unpack(fmt, a);
    let y = unpack(fmt, b);
    let sign = x.sign != y.sign;
    match (x.class, y.class) {
        (Nan, _) | (_, Nan) => fmt.canonical_nan(),
        (Inf, Inf) | (Zero, Zero) => fmt.canonical_nan(),
        (Inf, _) | (_, Zero) => fmt.infinity(sign),
        (Zero, _) | (_, Inf) => fmt.zero(sign),
        (Finite, Finite) => {
            // 64 extra bits leave the quotient at least 40 bits wide
            let num = (x.sig as u128) << 64;
            let den = y.sig as u128;
            let q = num / den;
            let sticky = num % den != 0;
            round_pack(fmt, sign, q, x.exp - y.exp - 64, sticky)
        }
    }
}

/// Floor square root of a 128-bit integer.
pub(crate) fn isqrt_u128(m: u128) -> u128 {
    if m < 2 {
        return m;
    }
    // overestimate, then Newton steps descend monotonically to the floor root
    let mut x = (m as f64).sqrt() as u128 + (1 << 12);
    loop {
        let y = (x + m / x) / 2;
        if y >= x {
            return x;
        }
        x = y;
    }
}

pub fn sqrt(fmt: FpFormat, a: u32) -> u32 {
    let x = unpack(fmt, a);
    match x.class {
        Class::Nan => fmt.canonical_nan(),
        Class::Zero => a,
        _ if x.sign => fmt.canonical_nan(),
        Class::Inf => a,
        Class::Finite => {
            let msb = 63 - x.sig.leading_zeros() as i32;
            let mut shift = 124 - msb;
            if (x.exp - shift) & 1 != 0 {
                shift += 1;
            }
            let m = (x.sig as u128) << shift as u32;
            let r = isqrt_u128(m);
            let sticky = r * r != m;
            round_pack(fmt, false, r, (x.exp - shift) / 2, sticky)
        }
    }
}

pub fn convert(src: FpFormat, bits: u32, dst: FpFormat) -> u32 {
    let x = unpack(src, bits);
    match x.class {
        Class::Nan => dst.canonical_nan(),
        Class::Inf => dst.infinity(x.sign),
        Class::Zero => dst.zero(x.sign),
        Class::Finite => round_pack(dst, x.sign, x.sig as u128, x.exp, false),
    }
}

/// Round an `f64` into `fmt`.
pub fn from_f64(fmt: FpFormat, v: f64) -> u32 {
    if v.is_nan() {
        return fmt.canonical_nan();
    }
    let bits = v.to_bits();
    let sign = bits >> 63 != 0;
    let exp_field = ((bits >> 52) & 0x7FF) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    match exp_field {
        0x7FF => fmt.infinity(sign),
        0 if frac == 0 => fmt.zero(sign),
        0 => round_pack(fmt, sign, frac as u128, -1074, false),
        e => round_pack(fmt, sign, (frac | 1 << 52) as u128, e - 1075, false),
    }
}

/// Exact value of an encoding as `f64` (every supported format embeds).
pub fn to_f64(fmt: FpFormat, bits: u32) -> f64 {
    let x = unpack(fmt, bits);
    let s = if x.sign { -1.0 } else { 1.0 };
    match x.class {
        Class::Nan => f64::NAN,
        Class::Inf => s * f64::INFINITY,
        Class::Zero => s * 0.0,
        Class::Finite => s * x.sig as f64 * (x.exp as f64).exp2(),
    }
}

/// Signed-magnitude ordering key; both zeros map to 0.
fn order_key(fmt: FpFormat, bits: u32) -> i64 {
    let mag = (bits & !fmt.sign_mask() & fmt.mask()) as i64;
    if bits & fmt.sign_mask() != 0 {
        -mag
    } else {
        mag
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpRel {
    Eq,
    Lt,
    Le,
}

pub fn compare(fmt: FpFormat, rel: CmpRel, a: u32, b: u32) -> bool {
    if fmt.is_nan(a) || fmt.is_nan(b) {
        return false;
    }
    let (x, y) = (order_key(fmt, a), order_key(fmt, b));
    match rel {
        CmpRel::Eq => x == y,
        CmpRel::Lt => x < y,
        CmpRel::Le => x <= y,
    }
}

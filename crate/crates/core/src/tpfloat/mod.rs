//! Bit-exact transprecision floating-point arithmetic.
//!
//! Three formats (binary32, binary16, bfloat16), scalar operations, the
//! widening 16x16+32 FMA, conversions, cast-and-pack and 2-lane packed-SIMD
//! operations on 16-bit data. All operations round to nearest-even, support
//! subnormals, and return the canonical quiet NaN whenever a NaN is produced.
//!
//! The typed API (`Scalar`, `Packed16`) checks operand formats; the raw-bit
//! functions in [`soft`] skip those checks and are what the kernels use.

mod format;
pub mod reference;
pub mod conformance;
pub mod soft;

pub use format::{FpFormat, RoundMode};
pub use soft::CmpRel;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FpError {
    #[error("format mismatch: expected {expected}, found {found}")]
    FormatMismatch { expected: FpFormat, found: FpFormat },
    #[error("{op} does not accept format {format}")]
    UnsupportedFormat { op: &'static str, format: FpFormat },
    #[error("bit pattern {bits:#x} does not fit in {format}")]
    BitsOutOfRange { format: FpFormat, bits: u32 },
    #[error("{op}: {what}")]
    Operand { op: &'static str, what: &'static str },
    #[error("lane selector {0} out of range (0..=3)")]
    SelectorOutOfRange(u8),
}

/// A floating-point value stored as its raw encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Scalar {
    format: FpFormat,
    bits: u32,
}

impl Scalar {
    pub fn new(format: FpFormat, bits: u32) -> Result<Self, FpError> {
        if bits & !format.mask() != 0 {
            return Err(FpError::BitsOutOfRange { format, bits });
        }
        Ok(Scalar { format, bits })
    }

    pub(crate) fn from_raw(format: FpFormat, bits: u32) -> Self {
        debug_assert_eq!(bits & !format.mask(), 0);
        Scalar { format, bits }
    }

    pub fn from_f32(v: f32) -> Self {
        Scalar { format: FpFormat::F32, bits: v.to_bits() }
    }

    /// Round an `f64` into `format`.
    pub fn from_f64(format: FpFormat, v: f64) -> Self {
        Scalar { format, bits: soft::from_f64(format, v) }
    }

    pub fn format(&self) -> FpFormat {
        self.format
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn to_f64(&self) -> f64 {
        soft::to_f64(self.format, self.bits)
    }

    pub fn is_nan(&self) -> bool {
        self.format.is_nan(self.bits)
    }
}

/// Two 16-bit lanes in one 32-bit register image; `lane0` is the low half.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Packed16 {
    format: FpFormat,
    pub lane0: u16,
    pub lane1: u16,
}

impl Packed16 {
    pub fn new(format: FpFormat, lane0: u16, lane1: u16) -> Result<Self, FpError> {
        if !format.is_16bit() {
            return Err(FpError::UnsupportedFormat { op: "packed16", format });
        }
        Ok(Packed16 { format, lane0, lane1 })
    }

    pub fn from_bits(format: FpFormat, bits: u32) -> Result<Self, FpError> {
        Self::new(format, bits as u16, (bits >> 16) as u16)
    }

    pub fn from_scalars(lo: Scalar, hi: Scalar) -> Result<Self, FpError> {
        same_format(lo.format, hi.format)?;
        Self::new(lo.format, lo.bits as u16, hi.bits as u16)
    }

    pub fn format(&self) -> FpFormat {
        self.format
    }

    pub fn to_bits(&self) -> u32 {
        self.lane0 as u32 | (self.lane1 as u32) << 16
    }

    pub fn lane(&self, i: usize) -> Scalar {
        let bits = if i == 0 { self.lane0 } else { self.lane1 };
        Scalar::from_raw(self.format, bits as u32)
    }
}

fn same_format(expected: FpFormat, found: FpFormat) -> Result<(), FpError> {
    if expected == found {
        Ok(())
    } else {
        Err(FpError::FormatMismatch { expected, found })
    }
}

fn check(fmt: FpFormat, xs: &[Scalar]) -> Result<(), FpError> {
    xs.iter().try_for_each(|x| same_format(fmt, x.format))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

pub fn fp_arith(op: ArithOp, fmt: FpFormat, a: Scalar, b: Scalar) -> Result<Scalar, FpError> {
    check(fmt, &[a, b])?;
    let bits = match op {
        ArithOp::Add => soft::add(fmt, a.bits, b.bits),
        ArithOp::Sub => soft::sub(fmt, a.bits, b.bits),
        ArithOp::Mul => soft::mul(fmt, a.bits, b.bits),
    };
    Ok(Scalar::from_raw(fmt, bits))
}

pub fn fp_fma(fmt: FpFormat, a: Scalar, b: Scalar, c: Scalar) -> Result<Scalar, FpError> {
    check(fmt, &[a, b, c])?;
    Ok(Scalar::from_raw(fmt, soft::fma(fmt, a.bits, b.bits, c.bits)))
}

/// Multi-format FMA: 16-bit multiplicands, binary32 addend and result.
pub fn fp_fma_widen(src: FpFormat, a: Scalar, b: Scalar, c: Scalar) -> Result<Scalar, FpError> {
    if !src.is_16bit() {
        return Err(FpError::UnsupportedFormat { op: "fma_widen", format: src });
    }
    check(src, &[a, b])?;
    same_format(FpFormat::F32, c.format)?;
    Ok(Scalar::from_raw(FpFormat::F32, soft::fma_widen(src, a.bits, b.bits, c.bits)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DivSqrtOp {
    Div,
    Sqrt,
}

pub fn fp_divsqrt(
    op: DivSqrtOp,
    fmt: FpFormat,
    a: Scalar,
    b: Option<Scalar>,
) -> Result<Scalar, FpError> {
    check(fmt, &[a])?;
    let bits = match (op, b) {
        (DivSqrtOp::Div, Some(b)) => {
            check(fmt, &[b])?;
            soft::div(fmt, a.bits, b.bits)
        }
        (DivSqrtOp::Sqrt, None) => soft::sqrt(fmt, a.bits),
        (DivSqrtOp::Div, None) => {
            return Err(FpError::Operand { op: "div", what: "divisor missing" })
        }
        (DivSqrtOp::Sqrt, Some(_)) => {
            return Err(FpError::Operand { op: "sqrt", what: "unexpected second operand" })
        }
    };
    Ok(Scalar::from_raw(fmt, bits))
}

pub fn convert(src: Scalar, dst: FpFormat) -> Scalar {
    Scalar::from_raw(dst, soft::convert(src.format, src.bits, dst))
}

/// Convert two binary32 values and pack them: `a` lands in lane 0.
pub fn cast_and_pack(a: Scalar, b: Scalar, dst: FpFormat) -> Result<Packed16, FpError> {
    if !dst.is_16bit() {
        return Err(FpError::UnsupportedFormat { op: "cast_and_pack", format: dst });
    }
    check(FpFormat::F32, &[a, b])?;
    Ok(Packed16 {
        format: dst,
        lane0: soft::convert(FpFormat::F32, a.bits, dst) as u16,
        lane1: soft::convert(FpFormat::F32, b.bits, dst) as u16,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SimdOp {
    Vadd,
    Vsub,
    Vmul,
    Vfma,
}

pub fn simd_op(
    op: SimdOp,
    va: Packed16,
    vb: Packed16,
    vc: Option<Packed16>,
) -> Result<Packed16, FpError> {
    let fmt = va.format;
    same_format(fmt, vb.format)?;
    let bits = match (op, vc) {
        (SimdOp::Vfma, Some(vc)) => {
            same_format(fmt, vc.format)?;
            simd::vfma(fmt, va.to_bits(), vb.to_bits(), vc.to_bits())
        }
        (SimdOp::Vfma, None) => {
            return Err(FpError::Operand { op: "vfma", what: "addend vector missing" })
        }
        (_, Some(_)) => {
            return Err(FpError::Operand { op: "simd", what: "unexpected addend vector" })
        }
        (SimdOp::Vadd, None) => simd::lanewise(fmt, va.to_bits(), vb.to_bits(), soft::add),
        (SimdOp::Vsub, None) => simd::lanewise(fmt, va.to_bits(), vb.to_bits(), soft::sub),
        (SimdOp::Vmul, None) => simd::lanewise(fmt, va.to_bits(), vb.to_bits(), soft::mul),
    };
    Packed16::from_bits(fmt, bits)
}

/// Two-lane dot product accumulated into binary32: `(c + a0*b0) + a1*b1`,
/// each step a single-rounding widening FMA.
pub fn vfdotp(va: Packed16, vb: Packed16, c: Scalar) -> Result<Scalar, FpError> {
    same_format(va.format, vb.format)?;
    same_format(FpFormat::F32, c.format)?;
    Ok(Scalar::from_raw(FpFormat::F32, simd::vfdotp(va.format, va.to_bits(), vb.to_bits(), c.bits)))
}

/// Select two of the four lanes `[a.lane0, a.lane1, b.lane0, b.lane1]`.
pub fn shuffle(va: Packed16, vb: Packed16, sel: [u8; 2]) -> Result<Packed16, FpError> {
    same_format(va.format, vb.format)?;
    if let Some(&bad) = sel.iter().find(|&&s| s > 3) {
        return Err(FpError::SelectorOutOfRange(bad));
    }
    Packed16::from_bits(va.format, simd::shuffle(va.to_bits(), vb.to_bits(), sel))
}

pub fn fp_cmp(rel: CmpRel, fmt: FpFormat, a: Scalar, b: Scalar) -> Result<bool, FpError> {
    check(fmt, &[a, b])?;
    Ok(soft::compare(fmt, rel, a.bits, b.bits))
}

/// Raw-bit packed operations on 32-bit register images.
pub mod simd {
    use super::soft;
    use super::FpFormat;

    pub fn lanewise(fmt: FpFormat, a: u32, b: u32, op: fn(FpFormat, u32, u32) -> u32) -> u32 {
        let lo = op(fmt, a & 0xFFFF, b & 0xFFFF);
        let hi = op(fmt, a >> 16, b >> 16);
        lo | hi << 16
    }

    pub fn vfma(fmt: FpFormat, a: u32, b: u32, c: u32) -> u32 {
        let lo = soft::fma(fmt, a & 0xFFFF, b & 0xFFFF, c & 0xFFFF);
        let hi = soft::fma(fmt, a >> 16, b >> 16, c >> 16);
        lo | hi << 16
    }

    pub fn vfdotp(fmt: FpFormat, a: u32, b: u32, c: u32) -> u32 {
        let first = soft::fma_widen(fmt, a & 0xFFFF, b & 0xFFFF, c);
        soft::fma_widen(fmt, a >> 16, b >> 16, first)
    }

    pub fn shuffle(a: u32, b: u32, sel: [u8; 2]) -> u32 {
        let lanes = [a & 0xFFFF, a >> 16, b & 0xFFFF, b >> 16];
        lanes[sel[0] as usize & 3] | lanes[sel[1] as usize & 3] << 16
    }

    pub fn cast_and_pack(a: u32, b: u32, dst: FpFormat) -> u32 {
        soft::convert(FpFormat::F32, a, dst) | soft::convert(FpFormat::F32, b, dst) << 16
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use FpFormat::*;

    fn h(v: f64) -> Scalar {
        Scalar::from_f64(F16, v)
    }

    fn pk(fmt: FpFormat, a: f64, b: f64) -> Packed16 {
        Packed16::from_scalars(Scalar::from_f64(fmt, a), Scalar::from_f64(fmt, b)).unwrap()
    }

    #[test]
    fn format_mismatch_is_usage_error() {
        let err = fp_arith(ArithOp::Add, F32, Scalar::from_f32(1.0), h(1.0)).unwrap_err();
        assert_eq!(err, FpError::FormatMismatch { expected: F32, found: F16 });
        assert!(fp_fma_widen(F32, Scalar::from_f32(1.0), Scalar::from_f32(1.0), Scalar::from_f32(0.0)).is_err());
        assert!(Scalar::new(F16, 0x1_0000).is_err());
        assert!(Packed16::new(F32, 0, 0).is_err());
    }

    #[test]
    fn cast_and_pack_examples() {
        let p = cast_and_pack(Scalar::from_f32(1.5), Scalar::from_f32(-2.0), F16).unwrap();
        assert_eq!((p.lane0, p.lane1), (0x3E00, 0xC000));
        let p = cast_and_pack(Scalar::from_f32(1e6), Scalar::from_f32(0.0), F16).unwrap();
        assert_eq!((p.lane0, p.lane1), (0x7C00, 0x0000));
        assert!(cast_and_pack(Scalar::from_f32(1.0), Scalar::from_f32(1.0), F32).is_err());
    }

    #[test]
    fn simd_examples() {
        let r = simd_op(SimdOp::Vadd, pk(F16, 1.0, 2.0), pk(F16, 3.0, 4.0), None).unwrap();
        assert_eq!(r, pk(F16, 4.0, 6.0));
        let a = pk(BF16, 1.5, -3.0);
        let b = pk(BF16, 2.25, 0.75);
        let zero = pk(BF16, 0.0, 0.0);
        assert_eq!(
            simd_op(SimdOp::Vfma, a, b, Some(zero)).unwrap(),
            simd_op(SimdOp::Vmul, a, b, None).unwrap()
        );
        assert!(simd_op(SimdOp::Vfma, a, b, None).is_err());
        assert!(simd_op(SimdOp::Vadd, a, pk(F16, 0.0, 0.0), None).is_err());
    }

    #[test]
    fn vfdotp_examples() {
        let r = vfdotp(pk(F16, 1.0, 2.0), pk(F16, 3.0, 4.0), Scalar::from_f32(0.5)).unwrap();
        assert_eq!(r.to_f64(), 11.5);
        let nan = Packed16::new(F16, 0x7E00, 0x3C00).unwrap();
        assert!(vfdotp(nan, pk(F16, 1.0, 1.0), Scalar::from_f32(0.0)).unwrap().is_nan());
    }

    #[test]
    fn shuffle_examples() {
        let a = Packed16::new(F16, 0x1111, 0x2222).unwrap();
        let b = Packed16::new(F16, 0x3333, 0x4444).unwrap();
        assert_eq!(shuffle(a, b, [0, 1]).unwrap(), a);
        assert_eq!(shuffle(a, b, [1, 0]).unwrap(), Packed16::new(F16, 0x2222, 0x1111).unwrap());
        assert_eq!(shuffle(a, b, [1, 2]).unwrap(), Packed16::new(F16, 0x2222, 0x3333).unwrap());
        assert_eq!(shuffle(a, b, [0, 4]).unwrap_err(), FpError::SelectorOutOfRange(4));
    }

    #[test]
    fn divsqrt_operand_rules() {
        let one = Scalar::from_f32(1.0);
        assert_eq!(fp_divsqrt(DivSqrtOp::Div, F32, one, Some(Scalar::from_f32(2.0))).unwrap().to_f64(), 0.5);
        assert!(fp_divsqrt(DivSqrtOp::Div, F32, one, None).is_err());
        assert!(fp_divsqrt(DivSqrtOp::Sqrt, F32, one, Some(one)).is_err());
    }

    #[test]
    fn compare_examples() {
        assert!(fp_cmp(CmpRel::Lt, F16, h(1.0), h(2.0)).unwrap());
        assert!(fp_cmp(CmpRel::Eq, F32, Scalar::from_f32(0.0), Scalar::from_f32(-0.0)).unwrap());
        assert!(!fp_cmp(CmpRel::Lt, F32, Scalar::from_f32(f32::NAN), Scalar::from_f32(1.0)).unwrap());
    }

    #[test]
    fn fma_identity_with_zero_multiplier() {
        let x = h(-7.25);
        let c = h(0.1);
        assert_eq!(fp_fma(F16, x, h(0.0), c).unwrap(), c);
    }
}

//! Arithmetic back ends for the functional kernels. Each kernel algorithm
//! is written once against [`Arith`] and evaluated both with the bit-exact
//! soft-float datapath and in `f64` for the error oracle, so both follow
//! the same operation order.

use crate::tpfloat::{soft, CmpRel, FpFormat};

/// `N` is a storage element (the variant's data format), `W` a binary32
/// accumulator. For the scalar variant both are binary32.
pub(crate) trait Arith: Sync {
    type N: Copy + Send + Sync;
    type W: Copy + Send + Sync;

    /// An input value; generated inputs are already representable.
    fn input(&self, x: f64) -> Self::N;
    fn wide(&self, x: f64) -> Self::W;
    fn n64(&self, v: Self::N) -> f64;
    fn w64(&self, v: Self::W) -> f64;

    fn narrow(&self, v: Self::W) -> Self::N;

    fn add(&self, a: Self::N, b: Self::N) -> Self::N;
    fn sub(&self, a: Self::N, b: Self::N) -> Self::N;
    fn mul(&self, a: Self::N, b: Self::N) -> Self::N;
    fn fma(&self, a: Self::N, b: Self::N, c: Self::N) -> Self::N;
    fn div(&self, a: Self::N, b: Self::N) -> Self::N;

    fn wfma(&self, a: Self::W, b: Self::W, c: Self::W) -> Self::W;
    fn wlt(&self, a: Self::W, b: Self::W) -> bool;

    /// `a*b + c` with storage multiplicands, single rounding into `W`.
    fn mac(&self, a: Self::N, b: Self::N, c: Self::W) -> Self::W;

    /// Packed dot product: lane 0 then lane 1 accumulated into `c`.
    fn dot2(&self, a: [Self::N; 2], b: [Self::N; 2], c: Self::W) -> Self::W {
        self.mac(a[1], b[1], self.mac(a[0], b[0], c))
    }
}

/// Bit-exact evaluation with the soft-float datapath.
pub(crate) struct Soft {
    pub fmt: FpFormat,
}

const W32: FpFormat = FpFormat::F32;

impl Arith for Soft {
    type N = u32;
    type W = u32;

    fn input(&self, x: f64) -> u32 {
        soft::from_f64(self.fmt, x)
    }
    fn wide(&self, x: f64) -> u32 {
        soft::from_f64(W32, x)
    }
    fn n64(&self, v: u32) -> f64 {
        soft::to_f64(self.fmt, v)
    }
    fn w64(&self, v: u32) -> f64 {
        soft::to_f64(W32, v)
    }
    fn narrow(&self, v: u32) -> u32 {
        soft::convert(W32, v, self.fmt)
    }
    fn add(&self, a: u32, b: u32) -> u32 {
        soft::add(self.fmt, a, b)
    }
    fn sub(&self, a: u32, b: u32) -> u32 {
        soft::sub(self.fmt, a, b)
    }
    fn mul(&self, a: u32, b: u32) -> u32 {
        soft::mul(self.fmt, a, b)
    }
    fn fma(&self, a: u32, b: u32, c: u32) -> u32 {
        soft::fma(self.fmt, a, b, c)
    }
    fn div(&self, a: u32, b: u32) -> u32 {
        soft::div(self.fmt, a, b)
    }
    fn wfma(&self, a: u32, b: u32, c: u32) -> u32 {
        soft::fma(W32, a, b, c)
    }
    fn wlt(&self, a: u32, b: u32) -> bool {
        soft::compare(W32, CmpRel::Lt, a, b)
    }
    fn mac(&self, a: u32, b: u32, c: u32) -> u32 {
        if self.fmt == W32 {
            soft::fma(W32, a, b, c)
        } else {
            soft::fma_widen(self.fmt, a, b, c)
        }
    }
}

/// Double-precision oracle: every rounding step of the soft path is
/// replaced by exact-as-possible `f64` arithmetic.
pub(crate) struct Exact;

impl Arith for Exact {
    type N = f64;
    type W = f64;

    fn input(&self, x: f64) -> f64 {
        x
    }
    fn wide(&self, x: f64) -> f64 {
        x
    }
    fn n64(&self, v: f64) -> f64 {
        v
    }
    fn w64(&self, v: f64) -> f64 {
        v
    }
    fn narrow(&self, v: f64) -> f64 {
        v
    }
    fn add(&self, a: f64, b: f64) -> f64 {
        a + b
    }
    fn sub(&self, a: f64, b: f64) -> f64 {
        a - b
    }
    fn mul(&self, a: f64, b: f64) -> f64 {
        a * b
    }
    fn fma(&self, a: f64, b: f64, c: f64) -> f64 {
        a.mul_add(b, c)
    }
    fn div(&self, a: f64, b: f64) -> f64 {
        a / b
    }
    fn wfma(&self, a: f64, b: f64, c: f64) -> f64 {
        a.mul_add(b, c)
    }
    fn wlt(&self, a: f64, b: f64) -> bool {
        a < b
    }
    fn mac(&self, a: f64, b: f64, c: f64) -> f64 {
        a.mul_add(b, c)
    }
}

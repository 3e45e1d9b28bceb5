//! Binary field arithmetic GF(2^w) for 1 <= w <= 32.
//!
//! Elements are polynomials over GF(2) modulo a fixed irreducible polynomial
//! of degree `w`, stored as integers: bit `i` is the coefficient of `x^i`.
//! A [`FieldCtx`] pins the width and modulus; the crate ships one canonical
//! modulus per width (the smallest irreducible polynomial of that degree)
//! and validates user-supplied moduli before use.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;

/// Errors raised by field construction and arithmetic.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    /// Width outside `1..=32`.
    #[error("unsupported field width {0}; need 1..=32")]
    Width(u32),
    /// Modulus does not have degree exactly `w`.
    #[error("modulus 0x{poly:x} does not have degree {w}")]
    Degree { w: u32, poly: u64 },
    /// Modulus has a nontrivial factor (found by exhaustive trial division).
    #[error("modulus 0x{poly:x} is reducible: divisible by 0x{factor:x}")]
    Reducible { poly: u64, factor: u64 },
    /// Widths above 16 only accept the shipped canonical modulus.
    #[error("modulus 0x{poly:x} for width {w} is not the shipped canonical modulus")]
    NotCanonical { w: u32, poly: u64 },
    /// Operands belong to different field contexts.
    #[error("field context mismatch: GF(2^{left}) vs GF(2^{right})")]
    CtxMismatch { left: u32, right: u32 },
    /// Division by the zero element.
    #[error("division by zero in GF(2^{0})")]
    DivisionByZero(u32),
    /// Value has bits at or above position `w`.
    #[error("value 0x{value:x} out of range for GF(2^{w})")]
    ValueRange { w: u32, value: u64 },
}

/// Smallest irreducible polynomial of each degree `w` (index = `w`),
/// including the `x^w` term. Verified irreducible by the exhaustive test in
/// this module's test suite.
pub const CANONICAL_POLY: [u64; 33] = [
    0,
    0x3, 0x7, 0xB, 0x13, 0x25, 0x43, 0x83, 0x11B,
    0x203, 0x409, 0x805, 0x1009, 0x201B, 0x4021, 0x8003, 0x1002B,
    0x20009, 0x40009, 0x80027, 0x100009, 0x200005, 0x400003, 0x800021, 0x100001B,
    0x2000009, 0x400001B, 0x8000027, 0x10000003, 0x20000005, 0x40000003, 0x80000009,
    0x10000008D,
];

fn poly_degree(p: u64) -> i32 {
    63 - p.leading_zeros() as i32
}

fn poly_rem(mut a: u64, m: u64) -> u64 {
    let dm = poly_degree(m);
    while a != 0 && poly_degree(a) >= dm {
        a ^= m << (poly_degree(a) - dm);
    }
    a
}

/// A binary field GF(2^w) with a fixed irreducible modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldCtx {
    w: u32,
    poly: u64,
}

impl FieldCtx {
    /// Field of width `w` with the shipped canonical modulus.
    pub fn new(w: u32) -> Result<FieldCtx, FieldError> {
        if !(1..=32).contains(&w) {
            return Err(FieldError::Width(w));
        }
        Ok(FieldCtx { w, poly: CANONICAL_POLY[w as usize] })
    }

    /// Field of width `w` with a caller-supplied modulus.
    ///
    /// For `w <= 16` the modulus is validated by exhaustive trial division
    /// over all candidate divisors of degree `1..=w/2`; for wider fields only
    /// the shipped canonical modulus is accepted.
    pub fn with_poly(w: u32, poly: u64) -> Result<FieldCtx, FieldError> {
        if !(1..=32).contains(&w) {
            return Err(FieldError::Width(w));
        }
        if poly_degree(poly) != w as i32 {
            return Err(FieldError::Degree { w, poly });
        }
        if w <= 16 {
            for d in 2..1u64 << (w / 2 + 1) {
                if poly_degree(d) >= 1 && poly_degree(d) <= (w / 2) as i32 && poly_rem(poly, d) == 0 {
                    return Err(FieldError::Reducible { poly, factor: d });
                }
            }
            Ok(FieldCtx { w, poly })
        } else if poly == CANONICAL_POLY[w as usize] {
            Ok(FieldCtx { w, poly })
        } else {
            Err(FieldError::NotCanonical { w, poly })
        }
    }

    /// Field width in bits.
    pub fn width(&self) -> u32 {
        self.w
    }

    /// The modulus, including the leading `x^w` term.
    pub fn poly(&self) -> u64 {
        self.poly
    }

    /// Number of field elements as u128 (2^w).
    pub fn order(&self) -> u128 {
        1u128 << self.w
    }

    fn check(&self, value: u64) -> Result<(), FieldError> {
        if self.w < 64 && value >> self.w != 0 {
            return Err(FieldError::ValueRange { w: self.w, value });
        }
        Ok(())
    }

    /// Product of two raw field values.
    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        debug_assert!(self.check(a).is_ok() && self.check(b).is_ok());
        // Carryless multiply: operands fit 32 bits so the product fits u64.
        let mut prod = 0u64;
        let mut b = b;
        let mut shift = 0;
        while b != 0 {
            let tz = b.trailing_zeros();
            shift += tz;
            prod ^= a << shift;
            b >>= tz + 1;
            shift += 1;
        }
        poly_rem(prod, self.poly)
    }

    /// Sum (= difference) of two raw field values.
    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        a ^ b
    }

    /// `a^e` by square-and-multiply.
    pub fn pow(&self, a: u64, mut e: u64) -> u64 {
        let mut base = a;
        let mut acc = 1u64;
        while e != 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse by the extended Euclidean algorithm.
    pub fn inv(&self, a: u64) -> Result<u64, FieldError> {
        self.check(a)?;
        if a == 0 {
            return Err(FieldError::DivisionByZero(self.w));
        }
        // Invariant: u = s*a (mod poly), v = t*a (mod poly).
        let (mut u, mut v) = (a, self.poly);
        let (mut s, mut t) = (1u64, 0u64);
        while u != 1 {
            let mut du = poly_degree(u);
            let dv = poly_degree(v);
            if du < dv {
                std::mem::swap(&mut u, &mut v);
                std::mem::swap(&mut s, &mut t);
                du = poly_degree(u);
            }
            let shift = (du - poly_degree(v)) as u32;
            u ^= v << shift;
            s ^= t << shift;
        }
        Ok(poly_rem(s, self.poly))
    }

    /// Wraps a raw value as a checked element.
    pub fn element(&self, value: u64) -> Result<FieldElement, FieldError> {
        self.check(value)?;
        Ok(FieldElement { ctx: *self, value })
    }

    /// Reads a `w`-bit string as an element: bit 0 of the string is the
    /// coefficient of `x^(w-1)` (big-endian, matching integer order).
    pub fn element_from_bits(&self, bits: &BitString) -> Result<FieldElement, FieldError> {
        if bits.len() != self.w as usize {
            return Err(FieldError::ValueRange { w: self.w, value: u64::MAX });
        }
        Ok(FieldElement { ctx: *self, value: bits.to_u64() })
    }
}

/// An element of a [`FieldCtx`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    ctx: FieldCtx,
    value: u64,
}

impl FieldElement {
    /// Owning context.
    pub fn ctx(&self) -> FieldCtx {
        self.ctx
    }

    /// Raw value, bit `i` = coefficient of `x^i`.
    pub fn value(&self) -> u64 {
        self.value
    }

    /// The element as a `w`-bit string (big-endian, see
    /// [`FieldCtx::element_from_bits`]).
    pub fn to_bits(&self) -> BitString {
        BitString::from_u64(self.value, self.ctx.w as usize)
    }

    fn same_ctx(&self, other: &FieldElement) -> Result<(), FieldError> {
        if self.ctx != other.ctx {
            return Err(FieldError::CtxMismatch { left: self.ctx.w, right: other.ctx.w });
        }
        Ok(())
    }

    /// Field addition.
    pub fn add(&self, other: &FieldElement) -> Result<FieldElement, FieldError> {
        self.same_ctx(other)?;
        Ok(FieldElement { ctx: self.ctx, value: self.value ^ other.value })
    }

    /// Field multiplication.
    pub fn mul(&self, other: &FieldElement) -> Result<FieldElement, FieldError> {
        self.same_ctx(other)?;
        Ok(FieldElement { ctx: self.ctx, value: self.ctx.mul(self.value, other.value) })
    }

    /// Multiplicative inverse.
    pub fn inv(&self) -> Result<FieldElement, FieldError> {
        Ok(FieldElement { ctx: self.ctx, value: self.ctx.inv(self.value)? })
    }
}

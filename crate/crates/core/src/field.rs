//! GF(2^w) arithmetic for the line-and-point demo instances.
//!
//! One fixed irreducible modulus per supported degree, so elements and
//! instances are reproducible across runs:
//!
//! | w  | modulus                       |
//! |----|-------------------------------|
//! | 2  | x^2 + x + 1                   |
//! | 3  | x^3 + x + 1                   |
//! | 4  | x^4 + x + 1                   |
//! | 8  | x^8 + x^4 + x^3 + x + 1       |
//! | 16 | x^16 + x^12 + x^3 + x + 1     |

use crate::error::{Error, Result};
use crate::rng::Seed;

fn modulus(w: u32) -> Result<u32> {
    Ok(match w {
        2 => 0b111,
        3 => 0b1011,
        4 => 0b1_0011,
        8 => 0x11B,
        16 => 0x1100B,
        _ => {
            return Err(Error::Domain(format!(
                "no fixed modulus for GF(2^{w}); supported degrees: 2, 3, 4, 8, 16"
            )))
        }
    })
}

/// An element of GF(2^w) under the fixed modulus for `w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    w: u32,
    value: u32,
}

impl FieldElement {
    pub fn new(w: u32, value: u32) -> Result<Self> {
        modulus(w)?;
        if w < 32 && value >> w != 0 {
            return Err(Error::Domain(format!("{value} is not a GF(2^{w}) element")));
        }
        Ok(Self { w, value })
    }

    pub fn zero(w: u32) -> Result<Self> {
        Self::new(w, 0)
    }

    pub fn one(w: u32) -> Result<Self> {
        Self::new(w, 1)
    }

    pub fn value(&self) -> u32 {
        self.value
    }

    pub fn degree(&self) -> u32 {
        self.w
    }

    pub fn add(&self, other: &FieldElement) -> FieldElement {
        debug_assert_eq!(self.w, other.w);
        FieldElement { w: self.w, value: self.value ^ other.value }
    }

    /// Carryless multiply followed by reduction mod the fixed polynomial.
    pub fn mul(&self, other: &FieldElement) -> FieldElement {
        debug_assert_eq!(self.w, other.w);
        let m = modulus(self.w).unwrap() as u64;
        let mut acc: u64 = 0;
        let mut a = self.value as u64;
        let mut b = other.value as u64;
        while b != 0 {
            if b & 1 == 1 {
                acc ^= a;
            }
            a <<= 1;
            b >>= 1;
        }
        // reduce: degree of acc is < 2w
        for i in (self.w..2 * self.w).rev() {
            if (acc >> i) & 1 == 1 {
                acc ^= m << (i - self.w);
            }
        }
        FieldElement { w: self.w, value: acc as u32 }
    }

    pub fn pow(&self, mut e: u64) -> FieldElement {
        let mut base = *self;
        let mut acc = FieldElement { w: self.w, value: 1 };
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via `a^(2^w - 2)`; fails on zero.
    pub fn inv(&self) -> Result<FieldElement> {
        if self.value == 0 {
            return Err(Error::Domain("zero has no multiplicative inverse".into()));
        }
        Ok(self.pow((1u64 << self.w) - 2))
    }
}

/// A line `y = a x + b` and an incident point `(u, v)` over GF(2^w).
///
/// The triple `(a, b, u)` is drawn uniformly from the seed, so the pair
/// carries `3w` bits of freedom while `v` is determined by incidence.
pub fn line_point_instance(
    w: u32,
    seed: &Seed,
) -> Result<((FieldElement, FieldElement), (FieldElement, FieldElement))> {
    if w < 2 {
        return Err(Error::Domain("field degree must be at least 2".into()));
    }
    modulus(w)?;
    let mut rng = seed.rng();
    let a = FieldElement::new(w, rng.next_bits(w) as u32)?;
    let b = FieldElement::new(w, rng.next_bits(w) as u32)?;
    let u = FieldElement::new(w, rng.next_bits(w) as u32)?;
    let v = a.mul(&u).add(&b);
    Ok(((a, b), (u, v)))
}

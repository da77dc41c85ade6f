//! Arithmetic in the prime field F_p for odd primes below 2^63.
//!
//! Elements are always kept as canonical residues in `[0, p)`. Products
//! go through a `u128` intermediate, which cannot overflow because both
//! factors are below 2^63.
//!
//! Two layers are provided: [`PrimeField`] operates on raw canonical
//! `u64` residues (the hot path used by polynomials and generators), and
//! [`FieldElement`] pairs a residue with its field so mixed-modulus
//! arithmetic is caught.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Moduli must be strictly below this bound.
pub const MODULUS_BOUND: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeField {
    p: u64,
}

impl PrimeField {
    /// Builds the field for an odd prime `p < 2^63`.
    pub fn new(p: u64) -> Result<Self> {
        let reason = if p < 3 {
            Some("modulus must be an odd prime >= 3")
        } else if p >= MODULUS_BOUND {
            Some("modulus must be below 2^63")
        } else if p.is_multiple_of(2) {
            Some("modulus must be odd")
        } else if !is_prime_u64(p) {
            Some("modulus is not prime")
        } else {
            None
        };
        match reason {
            Some(reason) => Err(Error::InvalidModulus { modulus: p, reason }),
            None => Ok(PrimeField { p }),
        }
    }

    #[inline]
    pub fn modulus(self) -> u64 {
        self.p
    }

    #[inline]
    pub fn elem(self, v: u64) -> FieldElement {
        FieldElement {
            value: v % self.p,
            field: self,
        }
    }

    #[inline]
    pub fn zero(self) -> FieldElement {
        self.elem(0)
    }

    #[inline]
    pub fn one(self) -> FieldElement {
        self.elem(1)
    }

    #[inline]
    pub fn reduce(self, v: u64) -> u64 {
        v % self.p
    }

    /// Canonical residue of a signed integer.
    #[inline]
    pub fn reduce_i128(self, v: i128) -> u64 {
        v.rem_euclid(self.p as i128) as u64
    }

    #[inline]
    pub fn add(self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.p && b < self.p);
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.p && b < self.p);
        if a >= b {
            a - b
        } else {
            a + (self.p - b)
        }
    }

    #[inline]
    pub fn neg(self, a: u64) -> u64 {
        debug_assert!(a < self.p);
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    #[inline]
    pub fn mul(self, a: u64, b: u64) -> u64 {
        debug_assert!(a < self.p && b < self.p);
        ((a as u128 * b as u128) % self.p as u128) as u64
    }

    /// Square-and-multiply; `pow(x, 0) = 1` for every `x`, including 0.
    pub fn pow(self, base: u64, mut e: u64) -> u64 {
        let mut acc = 1 % self.p;
        let mut b = base % self.p;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            e >>= 1;
        }
        acc
    }

    /// Inverse via Fermat; `None` for zero.
    pub fn inv(self, a: u64) -> Option<u64> {
        if a.is_multiple_of(self.p) {
            None
        } else {
            Some(self.pow(a, self.p - 2))
        }
    }

    /// Legendre symbol by Euler's criterion: 0, +1 or -1.
    pub fn legendre(self, a: u64) -> i8 {
        let r = self.pow(a, (self.p - 1) / 2);
        if r == 0 {
            0
        } else if r == 1 {
            1
        } else {
            debug_assert_eq!(r, self.p - 1);
            -1
        }
    }

    /// Least positive quadratic nonresidue.
    pub fn smallest_nonresidue(self) -> u64 {
        // Exists for every odd prime and is below sqrt(p) log p in practice.
        (2..self.p)
            .find(|&a| self.legendre(a) == -1)
            .expect("odd prime has a nonresidue")
    }
}

impl fmt::Display for PrimeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}", self.p)
    }
}

/// A canonical residue tagged with its field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u64,
    field: PrimeField,
}

impl FieldElement {
    #[inline]
    pub fn value(self) -> u64 {
        self.value
    }

    #[inline]
    pub fn field(self) -> PrimeField {
        self.field
    }

    fn same_field(self, other: FieldElement) -> Result<PrimeField> {
        if self.field != other.field {
            Err(Error::ModulusMismatch(self.field.p, other.field.p))
        } else {
            Ok(self.field)
        }
    }

    pub fn checked_add(self, other: FieldElement) -> Result<FieldElement> {
        let f = self.same_field(other)?;
        Ok(FieldElement {
            value: f.add(self.value, other.value),
            field: f,
        })
    }

    pub fn checked_sub(self, other: FieldElement) -> Result<FieldElement> {
        let f = self.same_field(other)?;
        Ok(FieldElement {
            value: f.sub(self.value, other.value),
            field: f,
        })
    }

    pub fn checked_mul(self, other: FieldElement) -> Result<FieldElement> {
        let f = self.same_field(other)?;
        Ok(FieldElement {
            value: f.mul(self.value, other.value),
            field: f,
        })
    }

    pub fn pow(self, e: u64) -> FieldElement {
        FieldElement {
            value: self.field.pow(self.value, e),
            field: self.field,
        }
    }

    pub fn inv(self) -> Option<FieldElement> {
        self.field.inv(self.value).map(|value| FieldElement {
            value,
            field: self.field,
        })
    }

    pub fn legendre(self) -> i8 {
        self.field.legendre(self.value)
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

// The operator forms panic on mixed moduli; use the `checked_*` methods
// when the operands come from untrusted input.
impl Add for FieldElement {
    type Output = FieldElement;
    fn add(self, rhs: FieldElement) -> FieldElement {
        self.checked_add(rhs)
            .expect("field elements from different fields")
    }
}

impl Sub for FieldElement {
    type Output = FieldElement;
    fn sub(self, rhs: FieldElement) -> FieldElement {
        self.checked_sub(rhs)
            .expect("field elements from different fields")
    }
}

impl Mul for FieldElement {
    type Output = FieldElement;
    fn mul(self, rhs: FieldElement) -> FieldElement {
        self.checked_mul(rhs)
            .expect("field elements from different fields")
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        FieldElement {
            value: self.field.neg(self.value),
            field: self.field,
        }
    }
}

#[inline]
fn mulmod(a: u64, b: u64, n: u64) -> u64 {
    ((a as u128 * b as u128) % n as u128) as u64
}

fn powmod(mut a: u64, mut e: u64, n: u64) -> u64 {
    let mut acc = 1 % n;
    a %= n;
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod(acc, a, n);
        }
        a = mulmod(a, a, n);
        e >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin, exact for every `u64`.
///
/// The first twelve primes as witnesses suffice for all n < 3.3 * 10^24.
pub fn is_prime_u64(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &q in &WITNESSES {
        if n == q {
            return true;
        }
        if n.is_multiple_of(q) {
            return false;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        r += 1;
    }
    'witness: for &a in &WITNESSES {
        let mut x = powmod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mulmod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

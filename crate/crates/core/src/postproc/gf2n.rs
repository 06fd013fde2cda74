//! Binary extension fields GF(2^b) for b ≤ 127, elements as `u128`.

use crate::error::{Error, Result};

/// x^96 + x^10 + x^9 + x^6 + 1.
pub const POLY_96: u128 = (1 << 96) | (1 << 10) | (1 << 9) | (1 << 6) | 1;
/// x^8 + x^4 + x^3 + x + 1 (the AES field).
pub const POLY_8: u128 = 0x11b;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gf2n {
    bits: u32,
    modulus: u128,
}

impl Gf2n {
    /// Field for a tag length with a built-in modulus (8 or 96).
    pub fn for_tag_bits(bits: u32) -> Result<Self> {
        match bits {
            8 => Ok(Self { bits, modulus: POLY_8 }),
            96 => Ok(Self { bits, modulus: POLY_96 }),
            _ => Err(Error::Parameter { field: "b_ev", reason: "supported tag lengths are 8 and 96" }),
        }
    }

    /// Field from a caller-supplied modulus of degree `bits`; irreducibility
    /// is the caller's responsibility (see [`is_irreducible`]).
    pub fn with_modulus(bits: u32, modulus: u128) -> Result<Self> {
        if !(1..=127).contains(&bits) || modulus >> bits != 1 {
            return Err(Error::Parameter { field: "modulus", reason: "degree must equal bits ≤ 127" });
        }
        Ok(Self { bits, modulus })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn mask(&self) -> u128 {
        (1u128 << self.bits) - 1
    }

    /// Carry-less product reduced on the fly.
    pub fn mul(&self, mut a: u128, mut b: u128) -> u128 {
        let top = 1u128 << self.bits;
        let mut r = 0u128;
        while b != 0 {
            if b & 1 == 1 {
                r ^= a;
            }
            b >>= 1;
            a <<= 1;
            if a & top != 0 {
                a ^= self.modulus;
            }
        }
        r
    }

    pub fn pow(&self, mut a: u128, mut e: u128) -> u128 {
        let mut r = 1u128;
        while e != 0 {
            if e & 1 == 1 {
                r = self.mul(r, a);
            }
            a = self.mul(a, a);
            e >>= 1;
        }
        r
    }
}

fn poly_mod(mut a: u128, f: u128) -> u128 {
    let df = 127 - f.leading_zeros();
    while a != 0 && 127 - a.leading_zeros() >= df {
        a ^= f << (127 - a.leading_zeros() - df);
    }
    a
}

fn poly_gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let r = poly_mod(a, b);
        a = b;
        b = r;
    }
    a
}

/// Rabin's test: f of degree n is irreducible iff x^(2^n) ≡ x mod f and
/// gcd(x^(2^(n/p)) − x, f) = 1 for every prime p | n.
pub fn is_irreducible(f: u128) -> bool {
    if f < 2 || f >> 127 != 0 {
        return false;
    }
    let n = 127 - f.leading_zeros();
    if n == 0 {
        return false;
    }
    let field = Gf2n { bits: n, modulus: f };
    let x = if n == 1 { poly_mod(2, f) } else { 2 };
    let frob = |k: u32| (0..k).fold(x, |acc, _| field.mul(acc, acc));
    if frob(n) != x {
        return false;
    }
    let mut m = n;
    let mut p = 2;
    while m > 1 {
        if m.is_multiple_of(p) {
            if poly_gcd(f, frob(n / p) ^ x) != 1 {
                return false;
            }
            while m.is_multiple_of(p) {
                m /= p;
            }
        }
        p += 1;
    }
    true
}

//! Polynomial-evaluation hashing for error verification.

use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::gf2n::Gf2n;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolyHash {
    field: Gf2n,
    point: u128,
}

impl PolyHash {
    /// Evaluation point drawn uniformly from the field by a seeded stream.
    pub fn from_seed(b_ev: u32, seed: u64) -> Result<Self> {
        let field = Gf2n::for_tag_bits(b_ev)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let point = ((rng.next_u64() as u128) << 64 | rng.next_u64() as u128) & field.mask();
        Ok(Self { field, point })
    }

    pub fn with_point(field: Gf2n, point: u128) -> Self {
        Self { field, point: point & field.mask() }
    }

    pub fn point(&self) -> u128 {
        self.point
    }

    /// Σ_i c_i·s^(k−i+1) over the b-bit coefficients c_1..c_k of the block
    /// (bit j of a coefficient is block bit i·b + j, last one zero-padded).
    pub fn tag(&self, bits: &[u8]) -> u128 {
        let b = self.field.bits() as usize;
        let mut acc = 0u128;
        for chunk in bits.chunks(b) {
            let c = chunk.iter().enumerate().fold(0u128, |c, (j, &v)| c | (((v & 1) as u128) << j));
            acc = self.field.mul(acc ^ c, self.point);
        }
        acc
    }
}

/// Number of b-bit coefficients in a block of `len` bits.
pub fn coefficient_count(len: usize, b_ev: u32) -> usize {
    len.div_ceil(b_ev as usize)
}

/// Tags both blocks under the seeded point; returns (tags equal, Bob's tag).
pub fn poly_hash_verify(block_a: &[u8], block_b: &[u8], b_ev: u32, seed: u64) -> Result<(bool, u128)> {
    if block_a.len() != block_b.len() {
        return Err(Error::Length { expected: block_a.len(), got: block_b.len() });
    }
    let h = PolyHash::from_seed(b_ev, seed)?;
    let (ta, tb) = (h.tag(block_a), h.tag(block_b));
    Ok((ta == tb, tb))
}

/// Tag serialized little-endian in ⌈b/8⌉ bytes.
pub fn tag_bytes(tag: u128, b_ev: u32) -> Vec<u8> {
    tag.to_le_bytes()[..(b_ev as usize).div_ceil(8)].to_vec()
}

//! Toeplitz-matrix privacy amplification.
//!
//! T is m×n with T[i][j] = g[i − j + n − 1] for a generator string g of
//! n + m − 1 bits, so the first column is g[n−1..] and the first row is g[..n]
//! reversed.

use alloc::vec;
use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Generator string of `len` bits drawn from the seeded stream, packed LSB first.
pub fn generator_bytes(len: usize, seed: u64) -> Vec<u8> {
    let mut out = vec![0u8; len.div_ceil(8)];
    ChaCha20Rng::seed_from_u64(seed).fill_bytes(&mut out);
    if !len.is_multiple_of(8) {
        if let Some(last) = out.last_mut() {
            *last &= (1u8 << (len % 8)) - 1;
        }
    }
    out
}

fn pack_words(bits: impl ExactSizeIterator<Item = u8>) -> Vec<u64> {
    let mut w = vec![0u64; bits.len().div_ceil(64) + 1];
    for (i, b) in bits.enumerate() {
        w[i / 64] |= ((b & 1) as u64) << (i % 64);
    }
    w
}

/// T·x over GF(2) for a generator given as packed bytes of n + m − 1 bits.
pub fn toeplitz_apply(bits: &[u8], out_len: usize, generator: &[u8]) -> Result<Vec<u8>> {
    let n = bits.len();
    if out_len > n {
        return Err(Error::Length { expected: n, got: out_len });
    }
    if out_len == 0 {
        return Ok(Vec::new());
    }
    let glen = n + out_len - 1;
    if generator.len() * 8 < glen {
        return Err(Error::Length { expected: glen.div_ceil(8), got: generator.len() });
    }
    // out[i] = ⊕_k g[i + k]·x[n − 1 − k]
    let g = pack_words((0..glen).map(|i| (generator[i / 8] >> (i % 8)) & 1));
    let r = pack_words(bits.iter().rev().copied());
    let words = n.div_ceil(64);
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let (q, s) = (i / 64, (i % 64) as u32);
        let mut acc = 0u64;
        if s == 0 {
            for t in 0..words {
                acc ^= g[q + t] & r[t];
            }
        } else {
            for t in 0..words {
                acc ^= ((g[q + t] >> s) | (g[q + t + 1] << (64 - s))) & r[t];
            }
        }
        out.push((acc.count_ones() & 1) as u8);
    }
    Ok(out)
}

/// Final key from the seeded Toeplitz family.
pub fn toeplitz_pa(bits: &[u8], out_len: usize, seed: u64) -> Result<Vec<u8>> {
    if out_len > bits.len() {
        return Err(Error::Length { expected: bits.len(), got: out_len });
    }
    let glen = (bits.len() + out_len).saturating_sub(1);
    toeplitz_apply(bits, out_len, &generator_bytes(glen, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn dense(bits: &[u8], m: usize, generator: &[u8]) -> Vec<u8> {
        let n = bits.len();
        let g = |k: usize| (generator[k / 8] >> (k % 8)) & 1;
        (0..m).map(|i| (0..n).fold(0u8, |acc, j| acc ^ (g(i + n - 1 - j) & bits[j]))).collect()
    }

    #[test]
    fn trivial_shapes() {
        assert_eq!(toeplitz_pa(&[0; 100], 40, 3).unwrap(), vec![0; 40]);
        assert!(toeplitz_pa(&[1, 0, 1], 0, 3).unwrap().is_empty());
        assert!(toeplitz_pa(&[1, 0, 1], 4, 3).is_err());
        assert!(toeplitz_apply(&[1; 16], 8, &[0xff; 2]).is_err());
    }

    #[test]
    fn exhaustive_universality_n6_m2() {
        let (n, m) = (6usize, 2usize);
        let glen = n + m - 1;
        let bits = |x: u32| (0..n).map(|i| ((x >> i) & 1) as u8).collect::<Vec<u8>>();
        let mut worst = 0.0f64;
        for x in 0..64u32 {
            for y in (x + 1)..64 {
                let coll = (0..1u32 << glen)
                    .filter(|&g| {
                        let gb = [g as u8];
                        toeplitz_apply(&bits(x), m, &gb).unwrap() == toeplitz_apply(&bits(y), m, &gb).unwrap()
                    })
                    .count();
                worst = worst.max(coll as f64 / (1u32 << glen) as f64);
            }
        }
        assert!(worst <= 0.25, "collision fraction {worst}");
    }

    #[test]
    fn matches_dense_product_up_to_4096() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for &(n, m) in &[(1usize, 1usize), (63, 5), (64, 64), (65, 1), (500, 129), (4096, 700), (4096, 4096)] {
            let bits: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let gen = generator_bytes(n + m - 1, rng.gen());
            assert_eq!(toeplitz_apply(&bits, m, &gen).unwrap(), dense(&bits, m, &gen), "n={n} m={m}");
        }
    }

    #[test]
    fn same_seed_same_key() {
        let bits: Vec<u8> = (0..1000).map(|i| (i * 7 % 3 == 0) as u8).collect();
        assert_eq!(toeplitz_pa(&bits, 100, 5).unwrap(), toeplitz_pa(&bits, 100, 5).unwrap());
        assert_ne!(toeplitz_pa(&bits, 100, 5).unwrap(), toeplitz_pa(&bits, 100, 6).unwrap());
    }

    proptest! {
        #[test]
        fn production_equals_dense(n in 1usize..300, frac in 0.0f64..1.0, seed in any::<u64>()) {
            let m = ((n as f64 * frac) as usize).max(1).min(n);
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let bits: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let gen = generator_bytes(n + m - 1, seed ^ 0x55);
            prop_assert_eq!(toeplitz_apply(&bits, m, &gen).unwrap(), dense(&bits, m, &gen));
        }
    }
}

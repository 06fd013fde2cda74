//! Finite-size corrections and the final key length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::binary_entropy;

/// Rank of Alice's key register for QPSK.
pub const RANK_X: usize = 4;

/// Δ(w) = √w·log₂|Z| + (1+√w)·h(√w/(1+√w)).
pub fn delta_w(w: f64, card_z: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::Parameter { field: "w", reason: "must lie in [0, 1]" });
    }
    let s = libm::sqrt(w);
    Ok(s * libm::log2(card_z as f64) + (1.0 + s) * binary_entropy(s / (1.0 + s)))
}

/// δ(ε̄) = 2·log₂(rank+3)·√(log₂(2/ε̄)/n).
pub fn delta_aep(eps_bar: f64, n: f64, rank_x: usize) -> Result<f64> {
    if !(n >= 1.0) {
        return Err(Error::Parameter { field: "n", reason: "must be ≥ 1" });
    }
    if !(eps_bar > 0.0 && eps_bar < 2.0) {
        return Err(Error::Parameter { field: "eps_bar", reason: "must lie in (0, 2)" });
    }
    Ok(2.0 * libm::log2(rank_x as f64 + 3.0) * libm::sqrt(libm::log2(2.0 / eps_bar) / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyLengthInputs {
    pub qre_lower: f64,
    pub delta_w: f64,
    pub delta_aep: f64,
    /// Error-correction leakage in bits per key-generation symbol.
    pub ec_leak: f64,
    /// Key-generation symbols.
    pub n: f64,
    /// All symbols sent.
    #[serde(rename = "N")]
    pub n_total: f64,
    pub n_blocks: u64,
    pub b_hash: u32,
    pub b_pa: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyLength {
    pub bits: u64,
    /// ℓ before flooring at zero.
    pub raw: f64,
    /// ℓ/N.
    pub fraction: f64,
    pub abort: bool,
}

/// ℓ = ⌊n·[QRE − Δ(w) − δ(ε̄) − EC_leak] − n_blocks·b_hash − b_PA⌋; a
/// non-positive value aborts.
pub fn key_length(k: &KeyLengthInputs) -> Result<KeyLength> {
    let finite = [k.qre_lower, k.delta_w, k.delta_aep, k.ec_leak, k.n, k.n_total].iter().all(|v| v.is_finite());
    if !finite {
        return Err(Error::Parameter { field: "key_length", reason: "inputs must be finite" });
    }
    if !(k.n >= 0.0 && k.n <= k.n_total && k.n_total > 0.0) {
        return Err(Error::Parameter { field: "n", reason: "need 0 ≤ n ≤ N, N > 0" });
    }
    let raw = k.n * (k.qre_lower - k.delta_w - k.delta_aep - k.ec_leak)
        - k.n_blocks as f64 * k.b_hash as f64
        - k.b_pa as f64;
    let bits = if raw > 0.0 { libm::floor(raw) as u64 } else { 0 };
    Ok(KeyLength { bits, raw, fraction: bits as f64 / k.n_total, abort: bits == 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn delta_w_values() {
        assert_eq!(delta_w(0.0, 4).unwrap(), 0.0);
        assert_relative_eq!(delta_w(1.0, 4).unwrap(), 4.0, max_relative = 1e-15);
        // mpmath, 30 digits: sqrt(w)*2 + (1+sqrt(w))*h(sqrt(w)/(1+sqrt(w)))
        assert_relative_eq!(delta_w(1e-7, 4).unwrap(), 4.765_448_540_108_943e-3, max_relative = 1e-12);
        assert!(delta_w(1.5, 4).is_err());
    }

    #[test]
    fn delta_aep_values() {
        // 2·log₂7·√(log₂(2.5e10)/1.38e9)
        let v = delta_aep(0.8e-10, 1.38e9, RANK_X).unwrap();
        assert_relative_eq!(v, 8.882_936_184_621_963e-4, max_relative = 1e-12);
        let a = delta_aep(1e-10, 1e6, 4).unwrap();
        let b = delta_aep(1e-10, 4e6, 4).unwrap();
        assert_relative_eq!(a / b, 2.0, max_relative = 1e-14);
        assert!(delta_aep(1e-10, 1e30, 4).unwrap() < 1e-12);
    }

    fn synthetic() -> KeyLengthInputs {
        KeyLengthInputs {
            qre_lower: 1.9,
            delta_w: 4.77e-3,
            delta_aep: 8.9e-4,
            ec_leak: 1.77,
            n: 0.6 * 2.3e9,
            n_total: 2.3e9,
            n_blocks: 2700,
            b_hash: 96,
            b_pa: 96,
        }
    }

    #[test]
    fn key_length_arithmetic() {
        let k = synthetic();
        let l = key_length(&k).unwrap();
        let per = 1.9 - 4.77e-3 - 8.9e-4 - 1.77;
        assert_relative_eq!(per, 0.12434, max_relative = 1e-12);
        let want = 0.6 * per - (2700.0 * 96.0 + 96.0) / 2.3e9;
        assert_relative_eq!(l.fraction, want, max_relative = 1e-8);
        assert!(!l.abort);
    }

    #[test]
    fn key_length_zero_margin_aborts() {
        let k = KeyLengthInputs { qre_lower: 1.0, delta_w: 0.25, delta_aep: 0.25, ec_leak: 0.5, n_blocks: 0, b_hash: 0, b_pa: 0, ..synthetic() };
        let l = key_length(&k).unwrap();
        assert_eq!(l.bits, 0);
        assert!(l.abort);
        assert!(key_length(&KeyLengthInputs { n: 3e9, ..synthetic() }).is_err());
    }

    proptest! {
        #[test]
        fn key_length_monotone_in_costs(
            dw in 0.0f64..0.05, da in 0.0f64..0.05, leak in 1.0f64..2.0,
            bump in 0.0f64..0.05, blocks in 0u64..5000, which in 0usize..5,
        ) {
            let base = KeyLengthInputs { delta_w: dw, delta_aep: da, ec_leak: leak, n_blocks: blocks, ..synthetic() };
            let mut more = base;
            match which {
                0 => more.delta_w += bump,
                1 => more.delta_aep += bump,
                2 => more.ec_leak += bump,
                3 => more.n_blocks += 1 + (bump * 1e4) as u64,
                _ => more.b_pa += 1 + (bump * 1e4) as u32,
            }
            prop_assert!(key_length(&more).unwrap().bits <= key_length(&base).unwrap().bits);
        }
    }
}

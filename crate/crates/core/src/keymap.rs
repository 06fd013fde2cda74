//! Bob's key map with radial postselection, Gray-coded bit labels and the
//! SNR estimate that drives code-rate selection.
//!
//! Radii are compared on |γ| = |y|/√2, the same amplitude scale as the
//! Energy Test and the region operators.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::SymbolFrame;
use crate::units::NuSample;

/// Code of the discarded symbol ⊥.
pub const BOT: u8 = 7;

/// Quadrant of y on half-open sectors [kπ/2, (k+1)π/2), decided on signs so
/// that the axes land exactly.
pub fn sector(q: f64, p: f64) -> u8 {
    if q > 0.0 && p >= 0.0 {
        0
    } else if q <= 0.0 && p > 0.0 {
        1
    } else if q < 0.0 && p <= 0.0 {
        2
    } else if q >= 0.0 && p < 0.0 {
        3
    } else {
        // origin
        0
    }
}

/// Symbol for one outcome: the sector when Δ_r ≤ |γ| ≤ M, otherwise ⊥.
pub fn key_map(y: NuSample, delta_r: f64, m: f64) -> u8 {
    let r2 = 0.5 * (y.q * y.q + y.p * y.p);
    if r2 < delta_r * delta_r || r2 > m * m {
        BOT
    } else {
        sector(y.q, y.p)
    }
}

/// Gray label: first bit is the sign of q, second the sign of p.
pub fn gray_bits(symbol: u8) -> [u8; 2] {
    debug_assert!(symbol < 4);
    match symbol {
        0 => [0, 0],
        1 => [1, 0],
        2 => [1, 1],
        _ => [0, 1],
    }
}

pub fn symbol_from_bits(bits: [u8; 2]) -> u8 {
    match bits {
        [0, 0] => 0,
        [1, 0] => 1,
        [1, 1] => 2,
        _ => 3,
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KeyString {
    pub symbols: Vec<u8>,
    pub kept_count: usize,
    pub r_perp: f64,
}

impl KeyString {
    pub fn from_symbols(symbols: Vec<u8>) -> Result<Self> {
        if symbols.iter().any(|&s| s > 3 && s != BOT) {
            return Err(Error::InvalidSample("key symbol outside {0..3, ⊥}"));
        }
        let kept_count = symbols.iter().filter(|&&s| s != BOT).count();
        let r_perp = if symbols.is_empty() { 0.0 } else { (symbols.len() - kept_count) as f64 / symbols.len() as f64 };
        Ok(Self { symbols, kept_count, r_perp })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Positions of ⊥ (what Bob discloses).
    pub fn discarded_positions(&self) -> Vec<u64> {
        self.symbols.iter().enumerate().filter(|(_, &s)| s == BOT).map(|(i, _)| i as u64).collect()
    }

    /// Gray bits of kept symbols, two per symbol, in order.
    pub fn kept_bits(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 * self.kept_count);
        for &s in self.symbols.iter().filter(|&&s| s != BOT) {
            out.extend_from_slice(&gray_bits(s));
        }
        out
    }

    /// Packed 3-bit codes, LSB first.
    pub fn pack(&self) -> Vec<u8> {
        let mut out = alloc::vec![0u8; (3 * self.symbols.len()).div_ceil(8)];
        for (i, &s) in self.symbols.iter().enumerate() {
            for b in 0..3 {
                if (s >> b) & 1 == 1 {
                    let pos = 3 * i + b;
                    out[pos / 8] |= 1 << (pos % 8);
                }
            }
        }
        out
    }

    pub fn unpack(count: usize, bytes: &[u8]) -> Result<Self> {
        let need = (3 * count).div_ceil(8);
        if bytes.len() != need {
            return Err(Error::Length { expected: need, got: bytes.len() });
        }
        let symbols = (0..count)
            .map(|i| (0..3).fold(0u8, |acc, b| {
                let pos = 3 * i + b;
                acc | (((bytes[pos / 8] >> (pos % 8)) & 1) << b)
            }))
            .collect();
        Self::from_symbols(symbols)
    }
}

pub fn map_outcomes(outcomes: &[NuSample], delta_r: f64, m: f64) -> Result<KeyString> {
    if !(delta_r >= 0.0 && delta_r < m) {
        return Err(Error::Parameter { field: "delta_r", reason: "must satisfy 0 ≤ delta_r < M" });
    }
    KeyString::from_symbols(outcomes.iter().map(|&y| key_map(y, delta_r, m)).collect())
}

pub fn map_frame(frame: &SymbolFrame, delta_r: f64, m: f64) -> Result<KeyString> {
    map_outcomes(&frame.outcomes, delta_r, m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrEstimate {
    pub snr: f64,
    /// Residual noise power vanished; `snr` is +∞.
    pub saturated: bool,
    pub kept: usize,
}

/// SNR over postselected symbols: mean power of the label-conditional mean of
/// γ divided by the mean squared deviation from it.
pub fn snr_estimate(frame: &SymbolFrame, delta_r: f64, m: f64) -> Result<SnrEstimate> {
    let mut n = [0usize; 4];
    let mut s = [(0.0, 0.0); 4];
    let mut ss = [0.0; 4];
    for (&x, &y) in frame.labels.iter().zip(&frame.outcomes) {
        if key_map(y, delta_r, m) == BOT {
            continue;
        }
        let k = x as usize;
        let g = y.gamma();
        n[k] += 1;
        s[k].0 += g.re;
        s[k].1 += g.im;
        ss[k] += g.norm_sqr();
    }
    if n.iter().any(|&c| c < 2) {
        return Err(Error::Estimation("too few kept symbols per label for an SNR estimate"));
    }
    let kept: usize = n.iter().sum();
    let mut signal = 0.0;
    let mut noise = 0.0;
    for k in 0..4 {
        let c = n[k] as f64;
        let mean2 = (s[k].0 * s[k].0 + s[k].1 * s[k].1) / (c * c);
        signal += c * mean2;
        noise += (ss[k] - c * mean2).max(0.0);
    }
    let (signal, noise) = (signal / kept as f64, noise / kept as f64);
    if noise <= 1e-15 * signal.max(1e-300) {
        return Ok(SnrEstimate { snr: f64::INFINITY, saturated: true, kept });
    }
    Ok(SnrEstimate { snr: signal / noise, saturated: false, kept })
}

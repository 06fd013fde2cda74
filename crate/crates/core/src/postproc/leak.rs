//! Reconciliation leakage and efficiency accounting.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconciliationReport {
    pub b_cor: u64,
    pub b_fail: u64,
    pub b_tot: u64,
    pub fer: f64,
    pub rate: f64,
    pub ec_leak_bits_per_symbol: f64,
    pub beta_bar: f64,
    /// Per-block 1 − h(p̂_k).
    pub i_ab: Vec<f64>,
}

impl ReconciliationReport {
    /// Counts and efficiency from per-block outcomes. `success[k]` and
    /// `i_ab[k]` describe block k.
    pub fn new(success: &[bool], i_ab: Vec<f64>, rate: f64, ec_leak_bits_per_symbol: f64) -> Result<Self> {
        if success.len() != i_ab.len() {
            return Err(Error::Length { expected: success.len(), got: i_ab.len() });
        }
        let b_cor = success.iter().filter(|&&s| s).count() as u64;
        let b_tot = success.len() as u64;
        let rates: Vec<f64> = success.iter().map(|&s| if s { rate } else { 0.0 }).collect();
        let beta_bar = if b_tot == 0 { 0.0 } else { avg_beta(&rates, &i_ab)?.beta_bar };
        Ok(Self {
            b_cor,
            b_fail: b_tot - b_cor,
            b_tot,
            fer: if b_tot == 0 { 0.0 } else { (b_tot - b_cor) as f64 / b_tot as f64 },
            rate,
            ec_leak_bits_per_symbol,
            beta_bar,
            i_ab,
        })
    }
}

/// Leakage per key-generation symbol. Corrected blocks leak their syndrome,
/// (1 − R) per bit; failed blocks are disclosed and charged their secret
/// content (QRE − Δ − δ) per symbol, capped at one bit per reconciled bit.
/// Kept symbols carry two bits and ⊥ none, hence the 2·(1 − r_⊥) factor.
pub fn ec_leak(b_cor: u64, b_fail: u64, rate: f64, qre: f64, delta_w: f64, delta_aep: f64, r_perp: f64) -> Result<f64> {
    let tot = b_cor + b_fail;
    if tot == 0 {
        return Err(Error::Parameter { field: "blocks", reason: "need B_cor + B_fail ≥ 1" });
    }
    if !(0.0..=1.0).contains(&rate) || !(0.0..1.0).contains(&r_perp) {
        return Err(Error::Parameter { field: "ec_leak", reason: "rate ∈ [0,1], r_perp ∈ [0,1)" });
    }
    let bits_per_symbol = 2.0 * (1.0 - r_perp);
    let fail_bit = ((qre - delta_w - delta_aep) / bits_per_symbol).clamp(0.0, 1.0);
    let (fc, ff) = (b_cor as f64 / tot as f64, b_fail as f64 / tot as f64);
    Ok(bits_per_symbol * (fc * (1.0 - rate) + ff * fail_bit))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaAverage {
    pub beta_bar: f64,
    /// Blocks dropped because their mutual information was not positive.
    pub excluded: usize,
}

/// β̄ = mean_k R_k/I_AB,k with R_k = 0 for failed blocks.
pub fn avg_beta(rates: &[f64], i_ab: &[f64]) -> Result<BetaAverage> {
    if rates.len() != i_ab.len() {
        return Err(Error::Length { expected: rates.len(), got: i_ab.len() });
    }
    let used: Vec<f64> = rates.iter().zip(i_ab).filter(|(_, &i)| i > 0.0).map(|(&r, &i)| r / i).collect();
    if used.is_empty() {
        return Err(Error::Estimation("no block with positive mutual information"));
    }
    Ok(BetaAverage { beta_bar: used.iter().sum::<f64>() / used.len() as f64, excluded: rates.len() - used.len() })
}

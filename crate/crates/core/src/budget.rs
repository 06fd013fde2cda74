//! Composable ε-ledger.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonBudget {
    #[serde(rename = "eps_PA")]
    pub eps_pa: f64,
    #[serde(rename = "eps_EC_max")]
    pub eps_ec_max: f64,
    #[serde(rename = "eps_ET")]
    pub eps_et: f64,
    #[serde(rename = "eps_AT")]
    pub eps_at: f64,
    pub eps_bar: f64,
    #[serde(rename = "eps_RNG")]
    pub eps_rng: f64,
}

impl EpsilonBudget {
    /// Sub-protocol values of the reference implementation, total 1e-10.
    pub const fn reference() -> Self {
        Self {
            eps_pa: 4e-15,
            eps_ec_max: 5e-12,
            eps_et: 1e-11,
            eps_at: 8e-11,
            eps_bar: 8e-11,
            eps_rng: 5e-12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for v in [self.eps_pa, self.eps_ec_max, self.eps_et, self.eps_at, self.eps_bar, self.eps_rng] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Budget("every ε component must lie in (0,1)"));
            }
        }
        Ok(())
    }
}

/// Which term of the secrecy maximum dominates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecrecyBranch {
    PrivacyAmplification,
    Tests,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonTotal {
    pub total: f64,
    pub branch: SecrecyBranch,
}

/// ε = ε_RNG + ε_EC + max(ε_PA/2 + ε̄, ε_ET + ε_AT).
pub fn epsilon_total(b: &EpsilonBudget) -> Result<EpsilonTotal> {
    b.validate()?;
    let pa = 0.5 * b.eps_pa + b.eps_bar;
    let tests = b.eps_et + b.eps_at;
    let (m, branch) = if pa >= tests {
        (pa, SecrecyBranch::PrivacyAmplification)
    } else {
        (tests, SecrecyBranch::Tests)
    };
    Ok(EpsilonTotal { total: b.eps_rng + b.eps_ec_max + m, branch })
}

/// b_PA = ⌈2·log₂(1/ε_PA)⌉. Values within 1e-9 of an integer are snapped
/// first, so that ε_PA = 2^{-k/2} maps to exactly k despite rounding in ε.
pub fn b_pa_from_eps(eps_pa: f64) -> Result<u32> {
    if !(eps_pa > 0.0 && eps_pa < 1.0) {
        return Err(Error::Budget("ε_PA must lie in (0,1)"));
    }
    let v = -2.0 * libm::log2(eps_pa);
    let r = libm::round(v);
    let v = if (v - r).abs() < 1e-9 { r } else { libm::ceil(v) };
    Ok(v as u32)
}

/// ε_EC = 2^{-b_EV}·⌈L/b_EV⌉·blocks.
pub fn epsilon_ec(b_ev: u32, l_ldpc: usize, blocks: usize) -> f64 {
    let coeffs = l_ldpc.div_ceil(b_ev as usize) as f64;
    libm::exp2(-(b_ev as f64)) * coeffs * blocks as f64
}

/// ε_EC with the block count taken as ⌈reconciled/L⌉.
pub fn epsilon_ec_from_length(b_ev: u32, l_ldpc: usize, reconciled: f64) -> f64 {
    let blocks = libm::ceil(reconciled / l_ldpc as f64) as usize;
    epsilon_ec(b_ev, l_ldpc, blocks)
}

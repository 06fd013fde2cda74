//! Run reports and the Δ_r sweep table.

use std::fmt::Write as _;

use dmcv_core::budget::{EpsilonBudget, EpsilonTotal};
use dmcv_core::keyrate::corrections::KeyLength;
use dmcv_core::keyrate::frank_wolfe::EntropyBound;
use dmcv_core::params::ProtocolParams;
use dmcv_core::postproc::leak::ReconciliationReport;
use dmcv_core::statproc::{AcceptanceOutcome, EnergyTestOutcome, MomentEstimates};
use serde::{Deserialize, Serialize};

use crate::transcript::LeakageAudit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Key,
    AbortEnergy,
    AbortAcceptance,
    /// ℓ ≤ 0, or no code rate fits the measured SNR.
    AbortLength,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Key => "key",
            Status::AbortEnergy => "abort-energy",
            Status::AbortAcceptance => "abort-acceptance",
            Status::AbortLength => "abort-length",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonLedger {
    pub budget: EpsilonBudget,
    pub total: EpsilonTotal,
    /// ε_EC from the verified block count and tag length.
    pub eps_ec: f64,
    /// ε_ET reached by the run's own test count, when the test's condition
    /// l_T/k_T ≤ w/r holds.
    pub eps_et: Option<f64>,
    pub b_pa_required: u32,
    /// Every achieved value within its budgeted cap.
    pub within_caps: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corrections {
    pub delta_w: f64,
    pub delta_aep: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub status: Status,
    pub seed: u64,
    pub params: ProtocolParams,
    /// False when μ_X and δ(ε̄) use borrowed statistics.
    pub certified: bool,
    pub characterization: String,
    pub test_symbols: u64,
    pub key_symbols: u64,
    pub energy_test: EnergyTestOutcome,
    pub acceptance_test: Option<AcceptanceOutcome>,
    pub moments: Option<MomentEstimates>,
    pub r_perp: Option<f64>,
    pub snr: Option<f64>,
    pub crossover: Option<f64>,
    pub qre: Option<EntropyBound>,
    pub corrections: Option<Corrections>,
    pub reconciliation: Option<ReconciliationReport>,
    /// n·EC_leak in bits, as charged in the key length.
    pub ec_leak_bits: Option<f64>,
    /// Charge per discarded bit.
    pub fail_charge: Option<f64>,
    /// Leakage was computed from an efficiency profile, not by decoding.
    pub simulated_leakage: bool,
    pub leakage: Option<LeakageAudit>,
    pub key_length: Option<KeyLength>,
    pub epsilon: Option<EpsilonLedger>,
    /// SHA-256 of the packed final key.
    pub key_digest: Option<String>,
    pub keys_match: Option<bool>,
}

impl RunReport {
    pub fn skf(&self) -> f64 {
        self.key_length.map_or(0.0, |k| k.bits as f64 / self.params.n_total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta_r: f64,
    pub status: Status,
    pub r_perp: f64,
    pub snr: f64,
    pub rate: f64,
    pub fer: f64,
    pub beta_bar: f64,
    pub ec_leak: f64,
    pub qre: f64,
    pub skf: f64,
}

impl SweepRow {
    pub fn from_report(delta_r: f64, r: &RunReport) -> Self {
        let rec = r.reconciliation.as_ref();
        Self {
            delta_r,
            status: r.status,
            r_perp: r.r_perp.unwrap_or(f64::NAN),
            snr: r.snr.unwrap_or(f64::NAN),
            rate: rec.map_or(f64::NAN, |x| x.rate),
            fer: rec.map_or(f64::NAN, |x| x.fer),
            beta_bar: rec.map_or(f64::NAN, |x| x.beta_bar),
            ec_leak: rec.map_or(f64::NAN, |x| x.ec_leak_bits_per_symbol),
            qre: r.qre.as_ref().map_or(f64::NAN, |b| b.lower),
            skf: r.skf(),
        }
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("delta_r,status,r_perp,snr,rate,fer,beta_bar,ec_leak,qre,skf\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:.4},{},{:.6},{:.6},{:.4},{:.6},{:.6},{:.6},{:.6},{:.6e}",
            r.delta_r,
            r.status.as_str(),
            r.r_perp,
            r.snr,
            r.rate,
            r.fer,
            r.beta_bar,
            r.ec_leak,
            r.qre,
            r.skf
        );
    }
    s
}

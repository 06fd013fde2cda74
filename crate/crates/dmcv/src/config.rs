//! Run configuration: one JSON document whose `profile` picks the defaults
//! that every other field overrides.

use std::path::Path;

use dmcv_core::budget::EpsilonBudget;
use dmcv_core::params::ProtocolParams;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Paper,
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacterizationConfig {
    /// Symbols in the characterization frame.
    pub symbols: usize,
    pub seed: u64,
    /// Back-to-back calibration symbols.
    pub b2b_symbols: usize,
}

/// How Bob's detector enters the key-map POVM of the entropy bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorModel {
    /// Noisy heterodyne with the calibrated η_D and ν_el; its noise is
    /// trusted, not attributed to Eve.
    Trusted,
    /// Ideal heterodyne on the state at the detector input.
    Ideal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyRateConfig {
    pub fw_tol: f64,
    pub fw_max_iter: usize,
    pub detector: DetectorModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconciliationConfig {
    /// Fixed code rate; `null` selects from the design table.
    pub rate: Option<f64>,
    /// Required ratio of measured SNR to the code's design threshold.
    pub backoff: f64,
    pub max_iter: usize,
    pub code_seed: u64,
    /// When set, no decoding happens and leakage follows the theoretical
    /// profile 1 − β·(1 − h(p)) per bit with this β.
    pub efficiency: Option<f64>,
}

/// Deviations of the run from the characterized channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    /// Excess noise during the run as a multiple of the configured ξ.
    pub xi_factor: f64,
    /// Outcomes replaced by high-energy pulses.
    pub injected: usize,
    /// |γ| of the injected outcomes.
    pub injected_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub profile: Profile,
    pub seed: u64,
    pub params: ProtocolParams,
    pub budget: EpsilonBudget,
    /// Test count and key-generation count used for μ_X, δ(ε̄) and the SDP
    /// in place of the run's own (desk runs borrow full-scale statistics).
    pub stat_k_t: Option<u64>,
    pub stat_n: Option<u64>,
    pub characterization: CharacterizationConfig,
    pub keyrate: KeyRateConfig,
    pub reconciliation: ReconciliationConfig,
    pub attack: AttackConfig,
}

impl Config {
    pub fn profile(profile: Profile) -> Self {
        let paper = ProtocolParams::paper();
        let params = match profile {
            Profile::Paper => paper.clone(),
            Profile::Desk => ProtocolParams::desk(),
        };
        let (stat_k_t, stat_n) = match profile {
            Profile::Paper => (None, None),
            Profile::Desk => (Some(paper.k_t()), Some(paper.n_key())),
        };
        Self {
            profile,
            seed: 1,
            params,
            budget: EpsilonBudget::reference(),
            stat_k_t,
            stat_n,
            characterization: CharacterizationConfig { symbols: 4_000_000, seed: 0xc0ffee, b2b_symbols: 200_000 },
            keyrate: KeyRateConfig { fw_tol: 1e-4, fw_max_iter: 300, detector: DetectorModel::Trusted },
            reconciliation: ReconciliationConfig { rate: None, backoff: 1.05, max_iter: 200, code_seed: 1, efficiency: None },
            attack: AttackConfig { xi_factor: 1.0, injected: 0, injected_amplitude: 10.0 },
        }
    }

    /// Profile defaults overlaid with the document's fields.
    pub fn from_value(doc: Value) -> Result<Self> {
        let profile = match doc.get("profile") {
            None => Profile::Desk,
            Some(p) => serde_json::from_value(p.clone()).map_err(|e| Error::Config(format!("profile: {e}")))?,
        };
        let mut base = serde_json::to_value(Self::profile(profile))?;
        merge(&mut base, doc);
        let cfg: Self = serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_value(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.budget.validate()?;
        let r = &self.reconciliation;
        if let Some(rate) = r.rate {
            dmcv_core::postproc::ldpc::syndrome_length(rate, self.params.l_ldpc)?;
        }
        if !(r.backoff >= 1.0) {
            return Err(Error::Config("reconciliation.backoff must be ≥ 1".into()));
        }
        if let Some(b) = r.efficiency {
            if !(b > 0.0 && b <= 1.0) {
                return Err(Error::Config("reconciliation.efficiency must lie in (0, 1]".into()));
            }
        }
        if !(self.attack.xi_factor >= 0.0) {
            return Err(Error::Config("attack.xi_factor must be ≥ 0".into()));
        }
        if self.characterization.symbols < 1000 {
            return Err(Error::Config("characterization.symbols must be ≥ 1000".into()));
        }
        if !(self.keyrate.fw_tol > 0.0) {
            return Err(Error::Config("keyrate.fw_tol must be > 0".into()));
        }
        Ok(())
    }

    /// k_T used by the statistics.
    pub fn stat_k_t(&self) -> u64 {
        self.stat_k_t.unwrap_or_else(|| self.params.k_t())
    }

    /// n used by δ(ε̄).
    pub fn stat_n(&self) -> u64 {
        self.stat_n.unwrap_or_else(|| self.params.n_key())
    }

    /// Whether the bound is backed by the run's own statistics.
    pub fn certified(&self) -> bool {
        self.stat_k_t() == self.params.k_t() && self.stat_n() == self.params.n_key()
    }
}

/// Recursive object merge; non-object values replace.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_defaults_round_trip() {
        for p in [Profile::Paper, Profile::Desk] {
            let c = Config::profile(p);
            let back = Config::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn overrides_merge_into_profile() {
        let c = Config::from_json(r#"{"profile":"paper","params":{"N_total":1000000,"n_c":12},"seed":9}"#).unwrap();
        assert_eq!(c.params.n_total, 1_000_000);
        assert_eq!(c.params.n_c, 12);
        assert_eq!(c.params.alpha_mag, 0.71);
        assert_eq!(c.seed, 9);
        assert!(c.certified());
        let d = Config::from_json(r#"{}"#).unwrap();
        assert_eq!(d.profile, Profile::Desk);
        assert!(!d.certified());
        assert_eq!(d.stat_k_t(), 920_000_000);
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(Config::from_json(r#"{"profile":"lab"}"#).is_err());
        assert!(Config::from_json(r#"{"params":{"eta_D":1.5}}"#).is_err());
        assert!(Config::from_json(r#"{"unknown":1}"#).is_err());
        assert!(Config::from_json(r#"{"reconciliation":{"rate":0.05},"params":{"L_ldpc":32768}}"#).is_err());
    }
}

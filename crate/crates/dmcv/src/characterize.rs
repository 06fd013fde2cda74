//! Characterization run: the frame whose trusted moments become the
//! acceptance-test centers and the SDP constraint values.

use std::path::{Path, PathBuf};

use dmcv_core::params::ProtocolParams;
use dmcv_core::simulator::{calibrate_b2b, prepare, transmit_measure, ChannelModel, ConstellationSpec};
use dmcv_core::statproc::{displaced_moments, estimate_channel, trusted_moments, ChannelEstimate, MomentEstimates};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::Result;
use crate::formats::{read_file, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Characterization {
    pub symbols: usize,
    pub seed: u64,
    pub alpha_b2b: f64,
    pub noisy: MomentEstimates,
    pub trusted: MomentEstimates,
    pub channel: ChannelEstimate,
    /// SHA-256 of the JSON of every other field.
    pub hash: String,
}

pub fn constellation(p: &ProtocolParams) -> ConstellationSpec {
    ConstellationSpec::qpsk(p.alpha_mag)
}

pub fn channel_model(p: &ProtocolParams, xi_factor: f64) -> ChannelModel {
    ChannelModel { eta_ch: p.eta_ch, xi: p.xi * xi_factor, eta_d: p.eta_d, nu_el: p.nu_el }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl Characterization {
    fn content_hash(&self) -> String {
        let mut c = self.clone();
        c.hash.clear();
        hex(&Sha256::digest(serde_json::to_vec(&c).expect("characterization serializes")))
    }

    pub fn verify_hash(&self) -> bool {
        self.content_hash() == self.hash
    }

    /// Stores the run as `characterization-<hash prefix>.json` under `dir`.
    pub fn store(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("characterization-{}.json", &self.hash[..16]));
        write_json(&path, self)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: Self = serde_json::from_slice(&read_file(path)?)?;
        if !c.verify_hash() {
            return Err(crate::Error::Format(format!("{}: content hash mismatch", path.display())));
        }
        Ok(c)
    }
}

/// Simulates the characterization frame on the configured channel.
pub fn characterize(cfg: &Config) -> Result<Characterization> {
    let p = &cfg.params;
    let spec = constellation(p);
    let model = channel_model(p, 1.0);
    let cc = &cfg.characterization;
    let alpha_b2b = calibrate_b2b(&spec, &model, cc.b2b_symbols, cc.seed ^ 0xb2b)?;
    let labels = prepare(cc.symbols, &spec, cc.seed)?;
    let frame = transmit_measure(&labels, &spec, &model, cc.seed)?;
    let noisy = displaced_moments(&frame)?;
    let trusted = trusted_moments(&noisy, p.eta_d, p.nu_el)?;
    let channel = estimate_channel(&trusted, alpha_b2b, p.eta_d)?;
    let mut c = Characterization { symbols: cc.symbols, seed: cc.seed, alpha_b2b, noisy, trusted, channel, hash: String::new() };
    c.hash = c.content_hash();
    Ok(c)
}

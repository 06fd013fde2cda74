//! Sum-product density evolution on the BSC by population dynamics.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::bsc::{crossover_from_snr, snr_from_crossover};
use super::ldpc::DegreeProfile;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeSettings {
    pub population: usize,
    pub max_iter: usize,
    /// Message error fraction below which decoding counts as successful.
    pub target: f64,
    /// Bisection steps on the crossover probability.
    pub steps: usize,
    pub seed: u64,
}

impl Default for DeSettings {
    fn default() -> Self {
        Self { population: 30_000, max_iter: 200, target: 1e-4, steps: 14, seed: 0x0de }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeThreshold {
    /// Largest crossover that still decodes.
    pub crossover: f64,
    /// The matching SNR, p = Q(√SNR).
    pub snr: f64,
}

/// Edge-perspective distributions as cumulative tables for sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    var: Vec<(usize, f64)>,
    check: Vec<(usize, f64)>,
}

fn normalized(d: &[(usize, f64)]) -> Result<Vec<(usize, f64)>> {
    let total: f64 = d.iter().map(|x| x.1).sum();
    if d.is_empty() || d.iter().any(|&(k, f)| k < 1 || !(f >= 0.0)) || !(total > 0.0) {
        return Err(Error::Parameter { field: "ensemble", reason: "need positive degrees and weights" });
    }
    let mut acc = 0.0;
    Ok(d.iter()
        .map(|&(k, f)| {
            acc += f / total;
            (k, acc)
        })
        .collect())
}

impl Ensemble {
    pub fn new(var: &[(usize, f64)], check: &[(usize, f64)]) -> Result<Self> {
        Ok(Self { var: normalized(var)?, check: normalized(check)? })
    }

    /// λ from the profile and checks concentrated on the two degrees around
    /// the mean the rate forces.
    pub fn from_profile(profile: &DegreeProfile, rate: f64) -> Result<Self> {
        profile.validate()?;
        let il: f64 = profile.var_edges.iter().map(|&(d, f)| f / d as f64).sum();
        let ir = (1.0 - rate) * il;
        let a = libm::floor(1.0 / ir) as usize;
        let f = (ir - 1.0 / (a + 1) as f64) / (1.0 / a as f64 - 1.0 / (a + 1) as f64);
        Self::new(&profile.var_edges, &[(a, f), (a + 1, 1.0 - f)])
    }

    pub fn design_rate(&self) -> f64 {
        let inv = |c: &[(usize, f64)]| {
            let mut prev = 0.0;
            c.iter().map(|&(d, cum)| {
                let f = cum - prev;
                prev = cum;
                f / d as f64
            }).sum::<f64>()
        };
        1.0 - inv(&self.check) / inv(&self.var)
    }

    fn sample(table: &[(usize, f64)], rng: &mut ChaCha20Rng) -> usize {
        let u: f64 = rng.gen();
        table.iter().find(|&&(_, c)| u < c).unwrap_or(table.last().unwrap()).0
    }

    /// Whether BP on the ensemble drives the message error below `target`
    /// within `max_iter` iterations at crossover p.
    pub fn decodes(&self, p: f64, s: &DeSettings) -> bool {
        let mut rng = ChaCha20Rng::seed_from_u64(s.seed);
        let l0 = libm::log((1.0 - p) / p);
        let n = s.population;
        let chan = |rng: &mut ChaCha20Rng| if rng.gen::<f64>() < p { -l0 } else { l0 };
        let mut msgs: Vec<f64> = (0..n).map(|_| chan(&mut rng)).collect();
        let mut checks = vec![0.0f64; n];
        for _ in 0..s.max_iter {
            let tanh: Vec<f64> = msgs.iter().map(|&m| libm::tanh(0.5 * m.clamp(-30.0, 30.0))).collect();
            for out in checks.iter_mut() {
                let d = Self::sample(&self.check, &mut rng);
                let mut prod = 1.0;
                for _ in 1..d {
                    prod *= tanh[rng.gen_range(0..n)];
                }
                *out = 2.0 * libm::atanh(prod.clamp(-1.0 + 1e-15, 1.0 - 1e-15));
            }
            let mut errors = 0usize;
            for m in msgs.iter_mut() {
                let d = Self::sample(&self.var, &mut rng);
                let mut x = chan(&mut rng);
                for _ in 1..d {
                    x += checks[rng.gen_range(0..n)];
                }
                errors += (x <= 0.0) as usize;
                *m = x;
            }
            if (errors as f64) < s.target * n as f64 {
                return true;
            }
        }
        false
    }

    /// Bisection on p over (lo, hi) with `decodes` as the predicate.
    pub fn threshold(&self, s: &DeSettings) -> DeThreshold {
        let (mut lo, mut hi) = (1e-4, 0.5);
        for _ in 0..s.steps {
            let mid = 0.5 * (lo + hi);
            if self.decodes(mid, s) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        DeThreshold { crossover: lo, snr: snr_from_crossover(lo) }
    }
}

/// Crossover at a given SNR, for callers that think in SNR.
pub fn decodes_at_snr(ens: &Ensemble, snr: f64, s: &DeSettings) -> bool {
    ens.decodes(crossover_from_snr(snr), s)
}

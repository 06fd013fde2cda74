//! Certified conditional-entropy bound for a characterization.

use std::time::Instant;

use dmcv_core::keyrate::constraints::{build_constraints, thermal_loss_state, ConstraintParams};
use dmcv_core::keyrate::corrections::{delta_aep, delta_w, RANK_X};
use dmcv_core::keyrate::fock::{region_operators, trusted_region_operators};
use dmcv_core::keyrate::frank_wolfe::{frank_wolfe_minimize, initial_point, EntropyBound, FwSettings};
use dmcv_core::linalg::CMat;
use dmcv_core::statproc::{acceptance_mu, norm_n, norm_n_sq, N_OBSERVABLES};
use serde::{Deserialize, Serialize};

use crate::characterize::{constellation, Characterization};
use crate::config::{Config, DetectorModel};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateResult {
    pub bound: EntropyBound,
    pub delta_w: f64,
    pub delta_aep: f64,
    /// μ_X per observable, n̂ and n̂² for each point in turn.
    pub mus: Vec<f64>,
    pub n_c: usize,
    pub delta_r: f64,
    pub characterization: String,
    pub seconds: f64,
}

/// μ_X for every observable at the statistics' test count.
pub fn acceptance_mus(cfg: &Config) -> Result<[f64; N_OBSERVABLES]> {
    let m = cfg.params.m;
    let mut out = [0.0; N_OBSERVABLES];
    for (i, mu) in out.iter_mut().enumerate() {
        let norm = if i % 2 == 0 { norm_n(m) } else { norm_n_sq(m) };
        *mu = acceptance_mu(norm, cfg.stat_k_t(), cfg.budget.eps_at, true)?;
    }
    Ok(out)
}

/// Frank-Wolfe bound with explicit μ_X (the acceptance-width monotonicity
/// checks vary them).
pub fn key_rate_with_mus(cfg: &Config, ch: &Characterization, mus: &[f64; N_OBSERVABLES], warm: Option<&CMat>) -> Result<(KeyRateResult, CMat)> {
    let t0 = Instant::now();
    let p = &cfg.params;
    let spec = constellation(p);
    let cp = ConstraintParams { n_c: p.n_c, m: p.m, w: p.w, t_f: p.t_f, eta_d: p.eta_d };
    let problem = build_constraints(&ch.trusted, mus, &cp, &spec)?;
    let regions = match cfg.keyrate.detector {
        DetectorModel::Trusted => trusted_region_operators(p.delta_r, p.m, p.n_c, p.eta_d, p.nu_el)?,
        DetectorModel::Ideal => region_operators(p.delta_r, p.m, p.n_c)?,
    };
    let start = match warm {
        Some(rho) if problem.feasibility(rho)?.holds(1e-9) => initial_point(&problem, Some(rho))?,
        _ => {
            let eta = ch.channel.eta_ch.clamp(1e-6, 1.0);
            let n_ex = (eta * ch.channel.xi / 2.0).max(0.0);
            let honest = thermal_loss_state(&spec, eta, n_ex, p.n_c)?;
            initial_point(&problem, Some(&honest))?
        }
    };
    let settings = FwSettings { tol: cfg.keyrate.fw_tol, max_iter: cfg.keyrate.fw_max_iter, ..FwSettings::default() };
    let out = frank_wolfe_minimize(&start, &problem, &regions, &settings)?;
    let result = KeyRateResult {
        bound: out.bound,
        delta_w: delta_w(p.w, 4)?,
        delta_aep: delta_aep(cfg.budget.eps_bar, cfg.stat_n() as f64, RANK_X)?,
        mus: mus.to_vec(),
        n_c: p.n_c,
        delta_r: p.delta_r,
        characterization: ch.hash.clone(),
        seconds: t0.elapsed().as_secs_f64(),
    };
    Ok((result, out.rho))
}

pub fn key_rate(cfg: &Config, ch: &Characterization) -> Result<KeyRateResult> {
    Ok(key_rate_with_mus(cfg, ch, &acceptance_mus(cfg)?, None)?.0)
}

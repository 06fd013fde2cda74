use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every protocol and physical parameter of a run, validated once at
/// construction.
///
/// Radii (`m`, `beta_test`, `delta_r`) are amplitudes |γ| = |q + i·p|/√2, so
/// the detection limit and the Energy-Test radius live on the same scale and
/// the tight choice is `beta_test == m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolParams {
    pub alpha_mag: f64,
    pub n_c: usize,
    #[serde(rename = "M")]
    pub m: f64,
    pub beta_test: f64,
    pub delta_r: f64,
    #[serde(rename = "r_T")]
    pub r_t: f64,
    #[serde(rename = "N_total")]
    pub n_total: u64,
    #[serde(rename = "l_T_frac")]
    pub l_t_frac: f64,
    pub w: f64,
    #[serde(rename = "t_F")]
    pub t_f: f64,
    #[serde(rename = "eta_D")]
    pub eta_d: f64,
    pub nu_el: f64,
    pub eta_ch: f64,
    pub xi: f64,
    #[serde(rename = "L_ldpc")]
    pub l_ldpc: usize,
    #[serde(rename = "b_EV")]
    pub b_ev: u32,
    #[serde(rename = "b_PA")]
    pub b_pa: u32,
    #[serde(default)]
    pub tight: bool,
}

impl ProtocolParams {
    /// Values of the reference experiment. `xi` is not reported there; 0.0074
    /// SNU is the value that reproduces its post-selection table.
    pub fn paper() -> Self {
        Self {
            alpha_mag: 0.71,
            n_c: 20,
            m: 5.5,
            beta_test: 5.5,
            delta_r: 0.6,
            r_t: 0.4,
            n_total: 2_300_000_000,
            l_t_frac: 1e-8,
            w: 1e-7,
            t_f: 1.0,
            eta_d: 0.6858,
            nu_el: 0.0193,
            eta_ch: 0.2764,
            xi: 0.0074,
            l_ldpc: 512_000,
            b_ev: 96,
            b_pa: 96,
            tight: true,
        }
    }

    /// Same physics at a size that runs in seconds.
    pub fn desk() -> Self {
        Self { n_c: 12, n_total: 1_000_000, l_ldpc: 32_000, ..Self::paper() }
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(field: &'static str, reason: &'static str) -> Result<()> {
            Err(Error::Parameter { field, reason })
        }
        let unit_open = |x: f64| x > 0.0 && x < 1.0;
        let unit_half = |x: f64| x > 0.0 && x <= 1.0;
        if !(self.alpha_mag.is_finite() && self.alpha_mag >= 0.0) {
            return bad("alpha_mag", "must be finite and ≥ 0");
        }
        if self.n_c < 1 {
            return bad("n_c", "must be ≥ 1");
        }
        if !(self.m.is_finite() && self.m > 0.0) {
            return bad("M", "must be finite and > 0");
        }
        if !(self.beta_test > 0.0 && self.beta_test <= self.m) {
            return bad("beta_test", "must satisfy 0 < beta_test ≤ M");
        }
        if self.tight && self.beta_test != self.m {
            return bad("beta_test", "tight mode requires beta_test = M");
        }
        if !(self.delta_r >= 0.0 && self.delta_r < self.m) {
            return bad("delta_r", "must satisfy 0 ≤ delta_r < M");
        }
        if !unit_open(self.r_t) {
            return bad("r_T", "must lie in (0,1)");
        }
        if self.n_total < 2 {
            return bad("N_total", "must be ≥ 2");
        }
        if !(self.l_t_frac >= 0.0 && self.l_t_frac < 1.0) {
            return bad("l_T_frac", "must lie in [0,1)");
        }
        if !(0.0..=1.0).contains(&self.w) {
            return bad("w", "must lie in [0,1]");
        }
        if !(self.t_f.is_finite() && self.t_f >= 0.0) {
            return bad("t_F", "must be finite and ≥ 0");
        }
        if !unit_half(self.eta_d) {
            return bad("eta_D", "must lie in (0,1]");
        }
        if !unit_half(self.eta_ch) {
            return bad("eta_ch", "must lie in (0,1]");
        }
        if !(self.nu_el.is_finite() && self.nu_el >= 0.0) {
            return bad("nu_el", "must be finite and ≥ 0");
        }
        if !(self.xi.is_finite() && self.xi >= 0.0) {
            return bad("xi", "must be finite and ≥ 0");
        }
        if self.l_ldpc < 2 {
            return bad("L_ldpc", "must be ≥ 2");
        }
        if self.b_ev < 1 || self.b_ev > 120 {
            return bad("b_EV", "must lie in 1..=120");
        }
        Ok(())
    }

    /// Number of test symbols k_T = ⌊r_T·N⌋ (at least one).
    pub fn k_t(&self) -> u64 {
        ((self.r_t * self.n_total as f64) as u64).clamp(1, self.n_total - 1)
    }

    /// Allowed outliers l_T = ⌊l_T_frac·k_T⌋.
    pub fn l_t(&self) -> u64 {
        (self.l_t_frac * self.k_t() as f64) as u64
    }

    /// Key-generation symbols n = N − k_T.
    pub fn n_key(&self) -> u64 {
        self.n_total - self.k_t()
    }
}

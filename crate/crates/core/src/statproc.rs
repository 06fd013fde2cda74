//! Statistics of the disclosed test symbols: Energy Test, displaced moments,
//! trusted-detector conversion, channel estimation and the Acceptance Test.

use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::SymbolFrame;
use crate::special::{gamma_q, kl_binary};
use crate::units::NuSample;

/// Number of observables in the Acceptance Test: n̂_{β_i} and n̂²_{β_i} for
/// the four constellation points, interleaved.
pub const N_OBSERVABLES: usize = 8;

// ---------------------------------------------------------------- Energy Test

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyTestSpec {
    pub beta_test: f64,
    pub k_t: u64,
    pub l_t: u64,
    pub w: f64,
    pub n_c: usize,
}

impl EnergyTestSpec {
    pub fn r_gamma(&self) -> f64 {
        energy_test_ratio(self.n_c, self.beta_test)
    }
}

/// r = Γ(n_c+1, 0)/Γ(n_c+1, β_test) = 1/Q(n_c+1, β_test).
pub fn energy_test_ratio(n_c: usize, beta_test: f64) -> f64 {
    1.0 / gamma_q(n_c as f64 + 1.0, beta_test)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyTestOutcome {
    pub outliers: u64,
    #[serde(rename = "l_T")]
    pub l_t: u64,
    pub pass: bool,
}

/// Counts outcomes with |γ| > β_test (strict).
pub fn count_outliers(outcomes: &[NuSample], beta_test: f64) -> u64 {
    let b2 = beta_test * beta_test;
    outcomes.iter().filter(|s| 0.5 * (s.q * s.q + s.p * s.p) > b2).count() as u64
}

pub fn run_energy_test(outcomes: &[NuSample], spec: &EnergyTestSpec) -> Result<EnergyTestOutcome> {
    if outcomes.is_empty() {
        return Err(Error::EmptyFrame);
    }
    let outliers = count_outliers(outcomes, spec.beta_test);
    Ok(EnergyTestOutcome { outliers, l_t: spec.l_t, pass: outliers <= spec.l_t })
}

/// ε_ET = (l_T+1)·2^{−k_T·D(P‖Q)} with P = (1−l_T/k_T, l_T/k_T) and
/// Q = (1−w/r, w/r).
pub fn energy_test_epsilon(k_t: u64, l_t: u64, w: f64, r: f64) -> Result<f64> {
    if k_t == 0 {
        return Err(Error::Parameter { field: "k_T", reason: "must be ≥ 1" });
    }
    let p = l_t as f64 / k_t as f64;
    let q = w / r;
    // Equality is the degenerate edge D = 0; strictly above is the theorem's domain.
    if p > q || q > 1.0 {
        return Err(Error::TheoremCondition { ratio: p, bound: q });
    }
    let d = kl_binary(p, q);
    Ok((l_t as f64 + 1.0) * libm::exp2(-(k_t as f64) * d))
}

pub fn energy_test_epsilon_for(spec: &EnergyTestSpec) -> Result<f64> {
    energy_test_epsilon(spec.k_t, spec.l_t, spec.w, spec.r_gamma())
}

/// Smallest w with ε_ET(w) ≤ target, by bisection to 1e-12 relative.
pub fn find_min_weight(n_c: usize, beta_test: f64, l_t_frac: f64, k_t: u64, target: f64) -> Result<f64> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::Parameter { field: "eps_ET", reason: "target must lie in (0,1]" });
    }
    let l_t = (l_t_frac * k_t as f64) as u64;
    let r = energy_test_ratio(n_c, beta_test);
    // Rounding can put w/r a hair below l_T/k_T at the left edge; such points
    // simply do not qualify.
    let eps = |w: f64| energy_test_epsilon(k_t, l_t, w, r).unwrap_or(f64::INFINITY);
    let mut lo = r * l_t as f64 / k_t as f64;
    let mut hi = 1.0;
    if eps(hi) > target {
        return Err(Error::Infeasible("no weight in (0,1] reaches the Energy-Test target"));
    }
    if l_t as f64 + 1.0 <= target {
        return Ok(lo);
    }
    for _ in 0..2000 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if eps(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

// ------------------------------------------------------------------ moments

/// Mergeable per-point sums of the raw outcomes (first pass).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CenterSums {
    pub count: [u64; 4],
    pub sum_q: [f64; 4],
    pub sum_p: [f64; 4],
}

impl CenterSums {
    pub fn accumulate(labels: &[u8], outcomes: &[NuSample]) -> Self {
        let mut s = Self::default();
        for (&x, y) in labels.iter().zip(outcomes) {
            let k = x as usize;
            s.count[k] += 1;
            s.sum_q[k] += y.q;
            s.sum_p[k] += y.p;
        }
        s
    }

    pub fn merge(mut self, o: &Self) -> Self {
        for k in 0..4 {
            self.count[k] += o.count[k];
            self.sum_q[k] += o.sum_q[k];
            self.sum_p[k] += o.sum_p[k];
        }
        self
    }

    /// Per-point mean outcome (q̄, p̄); fails unless every point has ≥ 2 samples.
    pub fn means(&self) -> Result<[(f64, f64); 4]> {
        if self.count.iter().any(|&c| c < 2) {
            return Err(Error::Estimation("each constellation point needs at least two test samples"));
        }
        Ok(core::array::from_fn(|k| {
            let n = self.count[k] as f64;
            (self.sum_q[k] / n, self.sum_p[k] / n)
        }))
    }
}

/// Mergeable per-point sums of centered powers of |γ̃|² (second pass).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CentralSums {
    pub count: [u64; 4],
    /// Σ(|γ̃|² − 1)
    pub s1: [f64; 4],
    /// Σ(|γ̃|⁴ − 3|γ̃|² + 1)
    pub s2: [f64; 4],
    /// Σ(|γ̃|² − 1)², for standard errors
    pub s11: [f64; 4],
}

impl CentralSums {
    pub fn accumulate(labels: &[u8], outcomes: &[NuSample], means: &[(f64, f64); 4]) -> Self {
        let mut s = Self::default();
        for (&x, y) in labels.iter().zip(outcomes) {
            let k = x as usize;
            let dq = y.q - means[k].0;
            let dp = y.p - means[k].1;
            let g2 = 0.5 * (dq * dq + dp * dp);
            let a = g2 - 1.0;
            s.count[k] += 1;
            s.s1[k] += a;
            s.s2[k] += g2 * g2 - 3.0 * g2 + 1.0;
            s.s11[k] += a * a;
        }
        s
    }

    pub fn merge(mut self, o: &Self) -> Self {
        for k in 0..4 {
            self.count[k] += o.count[k];
            self.s1[k] += o.s1[k];
            self.s2[k] += o.s2[k];
            self.s11[k] += o.s11[k];
        }
        self
    }
}

/// Displaced first and second photon-number moments per constellation point,
/// noisy (as measured) and trusted (detector removed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimates {
    pub n_nsy: [f64; 4],
    pub n_sq_nsy: [f64; 4],
    pub n_tr: [f64; 4],
    pub n_sq_tr: [f64; 4],
    /// Standard error of `n_nsy`.
    pub n_nsy_se: [f64; 4],
    #[serde(rename = "k_T_i")]
    pub counts: [u64; 4],
    pub centers: [Complex64; 4],
}

impl MomentEstimates {
    /// Noisy part from the two passes; trusted fields are copies until
    /// [`trusted_moments`] is applied.
    pub fn from_sums(centers: &CenterSums, central: &CentralSums) -> Result<Self> {
        let means = centers.means()?;
        let mut e = MomentEstimates {
            n_nsy: [0.0; 4],
            n_sq_nsy: [0.0; 4],
            n_tr: [0.0; 4],
            n_sq_tr: [0.0; 4],
            n_nsy_se: [0.0; 4],
            counts: centers.count,
            centers: core::array::from_fn(|k| Complex64::new(means[k].0, means[k].1) / SQRT_2),
        };
        for k in 0..4 {
            let n = central.count[k] as f64;
            let m1 = central.s1[k] / n;
            e.n_nsy[k] = m1;
            e.n_sq_nsy[k] = central.s2[k] / n;
            let var = (central.s11[k] / n - m1 * m1).max(0.0) * n / (n - 1.0);
            e.n_nsy_se[k] = libm::sqrt(var / n);
        }
        e.n_tr = e.n_nsy;
        e.n_sq_tr = e.n_sq_nsy;
        Ok(e)
    }

    pub fn k_t(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Trusted values in observable order (n̂_{β_0}, n̂²_{β_0}, n̂_{β_1}, …).
    pub fn observables(&self) -> [f64; N_OBSERVABLES] {
        core::array::from_fn(|j| if j % 2 == 0 { self.n_tr[j / 2] } else { self.n_sq_tr[j / 2] })
    }
}

/// Center-subtracted moments of a test frame (two passes over the data).
pub fn displaced_moments(frame: &SymbolFrame) -> Result<MomentEstimates> {
    let c = CenterSums::accumulate(&frame.labels, &frame.outcomes);
    let means = c.means()?;
    let s = CentralSums::accumulate(&frame.labels, &frame.outcomes, &means);
    MomentEstimates::from_sums(&c, &s)
}

/// Removes the trusted detector: n_tr = (n_nsy − ν)/η_D and
/// n²_tr = [n²_nsy − 2ν² − ν − (4ν+1−η_D)(n_nsy − ν)]/η_D².
pub fn trusted_pair(n_nsy: f64, n_sq_nsy: f64, eta_d: f64, nu_el: f64) -> (f64, f64) {
    let d = n_nsy - nu_el;
    let n_tr = d / eta_d;
    let n_sq_tr = (n_sq_nsy - 2.0 * nu_el * nu_el - nu_el - (4.0 * nu_el + 1.0 - eta_d) * d) / (eta_d * eta_d);
    (n_tr, n_sq_tr)
}

/// Inverse of [`trusted_pair`].
pub fn noisy_pair(n_tr: f64, n_sq_tr: f64, eta_d: f64, nu_el: f64) -> (f64, f64) {
    let d = eta_d * n_tr;
    let n_sq = eta_d * eta_d * n_sq_tr + 2.0 * nu_el * nu_el + nu_el + (4.0 * nu_el + 1.0 - eta_d) * d;
    (d + nu_el, n_sq)
}

pub fn trusted_moments(noisy: &MomentEstimates, eta_d: f64, nu_el: f64) -> Result<MomentEstimates> {
    if !(eta_d > 0.0) {
        return Err(Error::Domain("eta_D must be > 0"));
    }
    let mut e = noisy.clone();
    for k in 0..4 {
        (e.n_tr[k], e.n_sq_tr[k]) = trusted_pair(noisy.n_nsy[k], noisy.n_sq_nsy[k], eta_d, nu_el);
    }
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    pub eta_ch: f64,
    pub xi: f64,
    pub xi_per_point: [f64; 4],
}

/// η_Ch and ξ from trusted moments and the back-to-back amplitude.
///
/// `alpha_b2b` is the amplitude seen through the detector (√η_D·|α|), so both
/// it and the received amplitude are referred back through √η_D before the
/// ratio is taken.
pub fn estimate_channel(est: &MomentEstimates, alpha_b2b: f64, eta_d: f64) -> Result<ChannelEstimate> {
    if !(alpha_b2b > 0.0) {
        return Err(Error::Domain("alpha_B2B must be > 0"));
    }
    if !(eta_d > 0.0) {
        return Err(Error::Domain("eta_D must be > 0"));
    }
    let alpha_lab = alpha_b2b / libm::sqrt(eta_d);
    let back = |b: f64| b / libm::sqrt(eta_d);
    let beta_rec = est.centers.iter().map(|c| c.norm()).sum::<f64>() / 4.0;
    let eta_ch = (back(beta_rec) / alpha_lab).powi(2);
    let n_bar = est.n_tr.iter().sum::<f64>() / 4.0;
    let xi_per_point = core::array::from_fn(|k| {
        let eta_k = (back(est.centers[k].norm()) / alpha_lab).powi(2);
        2.0 * est.n_tr[k] / eta_k
    });
    Ok(ChannelEstimate { eta_ch, xi: 2.0 * n_bar / eta_ch, xi_per_point })
}

// ------------------------------------------------------------ Acceptance Test

/// ‖n̂_β‖_∞ on the detection-limited space.
pub fn norm_n(m: f64) -> f64 {
    m * m - 0.5
}

/// ‖n̂²_β‖_∞ on the detection-limited space.
pub fn norm_n_sq(m: f64) -> f64 {
    let m2 = m * m;
    m2 * m2 - 0.5 * m2
}

/// μ_X = √(2x²/m · ln(2/ε)), or √(x²/(2m) · ln(2/ε)) for PSD observables.
pub fn acceptance_mu(x_inf_norm: f64, m_x: u64, eps_at: f64, psd: bool) -> Result<f64> {
    if !(eps_at > 0.0 && eps_at < 1.0) {
        return Err(Error::Parameter { field: "eps_AT", reason: "must lie in (0,1)" });
    }
    if m_x < 1 {
        return Err(Error::Parameter { field: "m_X", reason: "must be ≥ 1" });
    }
    let x2 = x_inf_norm * x_inf_norm;
    let k = if psd { 0.5 } else { 2.0 };
    Ok(libm::sqrt(k * x2 / m_x as f64 * libm::log(2.0 / eps_at)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceSet {
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    pub mus: Vec<f64>,
    pub norms: Vec<f64>,
}

impl AcceptanceSet {
    /// Widths t_X = t_F·μ_X around the given centers, with m_X = `m_x` for
    /// every observable.
    pub fn new(centers: [f64; N_OBSERVABLES], m: f64, m_x: u64, eps_at: f64, t_f: f64, psd: bool) -> Result<Self> {
        let norms: Vec<f64> = (0..N_OBSERVABLES).map(|j| if j % 2 == 0 { norm_n(m) } else { norm_n_sq(m) }).collect();
        let mus = norms.iter().map(|&x| acceptance_mu(x, m_x, eps_at, psd)).collect::<Result<Vec<_>>>()?;
        let widths = mus.iter().map(|mu| t_f * mu).collect();
        Ok(Self { centers: centers.to_vec(), widths, mus, norms })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceOutcome {
    pub pass: bool,
    /// t_X − |v_X − r_X|; negative entries failed.
    pub margins: Vec<f64>,
}

pub fn run_acceptance_values(values: &[f64], set: &AcceptanceSet) -> Result<AcceptanceOutcome> {
    let n = values.len();
    if set.centers.len() != n || set.widths.len() != n {
        return Err(Error::Configuration(alloc::format!(
            "acceptance set covers {} observables, estimates {}",
            set.centers.len(),
            n
        )));
    }
    let margins: Vec<f64> = (0..n).map(|j| set.widths[j] - (values[j] - set.centers[j]).abs()).collect();
    Ok(AcceptanceOutcome { pass: margins.iter().all(|&m| m >= 0.0), margins })
}

pub fn run_acceptance_test(est: &MomentEstimates, set: &AcceptanceSet) -> Result<AcceptanceOutcome> {
    run_acceptance_values(&est.observables(), set)
}

// ------------------------------------------------------------ test selection

/// Uniform k-subset of 0..n without replacement (selection sampling), as a mask.
pub fn sample_test_mask(n: usize, k: usize, seed: u64) -> Result<Vec<bool>> {
    if k > n {
        return Err(Error::Parameter { field: "k_T", reason: "exceeds the number of symbols" });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut mask = Vec::with_capacity(n);
    let mut need = k;
    for i in 0..n {
        let left = n - i;
        let take = need > 0 && rng.gen_range(0..left) < need;
        if take {
            need -= 1;
        }
        mask.push(take);
    }
    Ok(mask)
}

/// Splits a frame into (test, key) parts by a mask.
pub fn split_frame(frame: &SymbolFrame, mask: &[bool]) -> Result<(SymbolFrame, SymbolFrame)> {
    if mask.len() != frame.len() {
        return Err(Error::Length { expected: frame.len(), got: mask.len() });
    }
    let mut test = SymbolFrame::default();
    let mut key = SymbolFrame::default();
    for (i, &t) in mask.iter().enumerate() {
        let dst = if t { &mut test } else { &mut key };
        dst.labels.push(frame.labels[i]);
        dst.outcomes.push(frame.outcomes[i]);
    }
    Ok((test, key))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{prepare, transmit_measure, ChannelModel, ConstellationSpec};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sim(n: usize, alpha: f64, model: ChannelModel, seed: u64) -> SymbolFrame {
        let spec = ConstellationSpec::qpsk(alpha);
        let labels = prepare(n, &spec, seed).unwrap();
        transmit_measure(&labels, &spec, &model, seed + 1).unwrap()
    }

    const VACUUM: ChannelModel = ChannelModel { eta_ch: 1.0, xi: 0.0, eta_d: 1.0, nu_el: 0.0 };

    #[test]
    fn energy_test_counts() {
        let origin = alloc::vec![NuSample { q: 0.0, p: 0.0 }; 10];
        let spec = EnergyTestSpec { beta_test: 1.0, k_t: 10, l_t: 0, w: 0.1, n_c: 5 };
        assert_eq!(run_energy_test(&origin, &spec).unwrap(), EnergyTestOutcome { outliers: 0, l_t: 0, pass: true });
        // |γ| = β_test exactly: q = √2·β_test.
        // |γ|² = (q² + p²)/2 = 4 exactly.
        let edge = [NuSample { q: 2.0, p: 2.0 }];
        assert_eq!(count_outliers(&edge, 2.0), 0);
        assert_eq!(count_outliers(&edge, 1.999), 1);
        assert_eq!(run_energy_test(&[], &spec), Err(Error::EmptyFrame));
    }

    #[test]
    fn energy_test_vacuum_tail() {
        // |γ|² ~ Exp(1) on vacuum, so P(|γ| > β) = e^{−β²}.
        let f = sim(1_000_000, 0.0, VACUUM, 3);
        let frac = count_outliers(&f.outcomes, 1.0) as f64 / 1e6;
        assert_relative_eq!(frac, (-1.0f64).exp(), max_relative = 0.01);
        assert_eq!(count_outliers(&f.outcomes, 5.5), 0);
    }

    #[test]
    fn energy_epsilon_closed_form() {
        let eps = energy_test_epsilon(1000, 0, 0.01, 1.0).unwrap();
        assert_relative_eq!(eps, 0.99f64.powi(1000), max_relative = 1e-10);
        assert_relative_eq!(eps, 4.317e-5, max_relative = 1e-3);
        // Divergence vanishes at the condition boundary.
        assert_relative_eq!(energy_test_epsilon(1000, 10, 0.01, 1.0).unwrap(), 11.0, max_relative = 1e-9);
        assert!(matches!(energy_test_epsilon(1000, 20, 0.01, 1.0), Err(Error::TheoremCondition { .. })));
    }

    #[test]
    fn min_weight_reference_point() {
        let k_t = 920_000_000;
        let w = find_min_weight(20, 5.5, 1e-8, k_t, 1e-11).unwrap();
        let r = energy_test_ratio(20, 5.5);
        let eps = energy_test_epsilon(k_t, 9, w, r).unwrap();
        assert!(eps <= 1e-11 && eps > 0.99e-11, "{eps}");
        assert!(9.0 / k_t as f64 <= w / r);
        // Verbatim ratio puts w near 5.7e-8 (see the criterion analysis).
        assert!(w > 5.0e-8 && w < 6.5e-8, "{w}");
        let w_half = find_min_weight(20, 5.5, 1e-8, k_t / 2, 1e-11).unwrap();
        assert!(w_half > w);
    }

    #[test]
    fn min_weight_trivial_target() {
        let w = find_min_weight(20, 5.5, 0.0, 1000, 1.0).unwrap();
        assert_eq!(w, 0.0);
        // l_T = 10: the smallest w sits strictly inside the domain.
        let w = find_min_weight(20, 5.5, 0.01, 1000, 1.0).unwrap();
        let r = energy_test_ratio(20, 5.5);
        assert!(energy_test_epsilon(1000, 10, w, r).unwrap() <= 1.0);
        assert!(energy_test_epsilon(1000, 10, w * (1.0 - 1e-9), r).unwrap() > 1.0);
        assert!(matches!(find_min_weight(20, 5.5, 0.0, 10, 1e-300), Err(Error::Infeasible(_))));
    }

    #[test]
    fn moments_identical_samples() {
        let f = SymbolFrame::new(
            alloc::vec![0, 0, 1, 1, 2, 2, 3, 3],
            alloc::vec![NuSample { q: 0.3, p: -0.2 }; 8],
        )
        .unwrap();
        let e = displaced_moments(&f).unwrap();
        for k in 0..4 {
            assert_eq!(e.n_nsy[k], -1.0);
            assert_eq!(e.n_sq_nsy[k], 1.0);
        }
        let short = SymbolFrame::new(alloc::vec![0, 1, 2, 3], alloc::vec![NuSample { q: 0.0, p: 0.0 }; 4]).unwrap();
        assert!(matches!(displaced_moments(&short), Err(Error::Estimation(_))));
    }

    #[test]
    fn moments_vacuum_and_trusted_noise() {
        let f = sim(1_000_000, 0.5, VACUUM, 5);
        let e = displaced_moments(&f).unwrap();
        for k in 0..4 {
            assert!(e.n_nsy[k].abs() < 3.0 * e.n_nsy_se[k] + 1e-5, "{k}: {} ± {}", e.n_nsy[k], e.n_nsy_se[k]);
            // Vacuum: ⟨n̂²⟩ = 0.
            assert!(e.n_sq_nsy[k].abs() < 0.02);
        }
        let f = sim(1_000_000, 0.5, ChannelModel { nu_el: 0.05, ..VACUUM }, 7);
        let e = displaced_moments(&f).unwrap();
        for k in 0..4 {
            assert!((e.n_nsy[k] - 0.05).abs() < 3.0 * e.n_nsy_se[k] + 1e-5);
        }
    }

    #[test]
    fn thermal_second_moment() {
        // Thermal mean N: ⟨n̂²⟩ = 2N² + N.
        let model = ChannelModel { eta_ch: 1.0, xi: 1.0, eta_d: 1.0, nu_el: 0.0 };
        let e = displaced_moments(&sim(1_000_000, 0.4, model, 9)).unwrap();
        for k in 0..4 {
            let n = e.n_nsy[k];
            assert!((n - 0.5).abs() < 0.01);
            assert_relative_eq!(e.n_sq_nsy[k], 2.0 * n * n + n, max_relative = 0.03);
        }
    }

    #[test]
    fn trusted_conversion_examples() {
        assert_eq!(trusted_pair(0.3, 0.7, 1.0, 0.0), (0.3, 0.7));
        assert_eq!(trusted_pair(0.0193, 0.5, 0.6858, 0.0193).0, 0.0);
        let (n_tr, n_sq) = trusted_pair(0.05, 0.02, 0.6858, 0.0193);
        assert_relative_eq!(n_tr, 0.044765237, max_relative = 1e-6);
        let want = (0.02 - 2.0 * 0.0193f64.powi(2) - 0.0193 - (4.0 * 0.0193 + 1.0 - 0.6858) * (0.05 - 0.0193)) / 0.6858f64.powi(2);
        assert_relative_eq!(n_sq, want, max_relative = 1e-14);
    }

    #[test]
    fn pure_loss_trusted_moments_vanish() {
        let model = ChannelModel { eta_ch: 0.2764, xi: 0.0, eta_d: 0.6858, nu_el: 0.0193 };
        let mut good = 0;
        for seed in 0..20 {
            let e = displaced_moments(&sim(200_000, 0.71, model, 100 + 2 * seed)).unwrap();
            let t = trusted_moments(&e, model.eta_d, model.nu_el).unwrap();
            if (0..4).all(|k| t.n_tr[k].abs() <= 4.0 * e.n_nsy_se[k] / model.eta_d) {
                good += 1;
            }
        }
        assert!(good >= 19, "{good}/20");
    }

    #[test]
    fn channel_round_trip() {
        let model = ChannelModel { eta_ch: 0.2764, xi: 0.02, eta_d: 0.6858, nu_el: 0.0193 };
        let alpha = 0.71;
        let e = displaced_moments(&sim(1_000_000, alpha, model, 31)).unwrap();
        let t = trusted_moments(&e, model.eta_d, model.nu_el).unwrap();
        let b2b = model.eta_d.sqrt() * alpha;
        let c = estimate_channel(&t, b2b, model.eta_d).unwrap();
        assert_relative_eq!(c.eta_ch, 0.2764, max_relative = 0.05);
        // ξ's standard error at this size is about 0.01, half of ξ itself.
        let se_n = (0..4).map(|k| e.n_nsy_se[k].powi(2)).sum::<f64>().sqrt() / 4.0 / model.eta_d;
        let se_xi = 2.0 * se_n / c.eta_ch;
        assert!((c.xi - 0.02).abs() < 3.5 * se_xi, "{} ± {se_xi}", c.xi);

        let e = displaced_moments(&sim(1_000_000, alpha, VACUUM, 33)).unwrap();
        let c = estimate_channel(&e, alpha, 1.0).unwrap();
        assert!((c.eta_ch - 1.0).abs() < 0.01 && c.xi.abs() < 0.01);
        assert!(estimate_channel(&e, 0.0, 1.0).is_err());
    }

    #[test]
    fn acceptance_mu_examples() {
        let mu = acceptance_mu(29.75, 1_000_000, 8e-11, true).unwrap();
        assert_relative_eq!(mu, 0.1029, max_relative = 1e-3);
        assert_relative_eq!(acceptance_mu(29.75, 1_000_000, 8e-11, false).unwrap(), 2.0 * mu, max_relative = 1e-14);
        assert!(acceptance_mu(1.0, 10, 2.0, false).is_err());
        assert_relative_eq!(acceptance_mu(3.0, 4_000_000, 1e-3, false).unwrap(), 0.5 * acceptance_mu(3.0, 1_000_000, 1e-3, false).unwrap(), max_relative = 1e-14);
        assert_eq!(norm_n(5.5), 29.75);
        assert_eq!(norm_n_sq(5.5), 5.5f64.powi(4) - 0.5 * 30.25);
    }

    #[test]
    fn acceptance_boundaries() {
        let c = [0.1, 0.2, 0.1, 0.2, 0.1, 0.2, 0.1, 0.2];
        let set = AcceptanceSet::new(c, 5.5, 1_000_000, 8e-11, 1.0, false).unwrap();
        let out = run_acceptance_values(&c, &set).unwrap();
        assert!(out.pass);
        assert_eq!(out.margins, set.widths);
        let mut v = c;
        v[3] = c[3] + set.widths[3];
        assert!(run_acceptance_values(&v, &set).unwrap().pass);
        v[3] += 1e-9;
        assert!(!run_acceptance_values(&v, &set).unwrap().pass);
        assert!(matches!(run_acceptance_values(&c[..7], &set), Err(Error::Configuration(_))));
    }

    #[test]
    fn test_mask_exact_size() {
        let m = sample_test_mask(10_000, 4000, 5).unwrap();
        assert_eq!(m.iter().filter(|&&b| b).count(), 4000);
        assert_eq!(m, sample_test_mask(10_000, 4000, 5).unwrap());
        assert!(sample_test_mask(10, 11, 5).is_err());
        assert!(sample_test_mask(10, 10, 5).unwrap().iter().all(|&b| b));
    }

    proptest! {
        #[test]
        fn trusted_inverse_roundtrip(n in -0.1f64..2.0, n2 in -0.1f64..10.0, eta in 0.05f64..1.0, nu in 0.0f64..0.5) {
            let (a, b) = trusted_pair(n, n2, eta, nu);
            let (c, d) = noisy_pair(a, b, eta, nu);
            prop_assert!((c - n).abs() <= 1e-12 * (1.0 + n.abs()));
            prop_assert!((d - n2).abs() <= 1e-12 * (1.0 + n2.abs()) / (eta * eta));
        }

        #[test]
        fn epsilon_decreasing_in_k_and_w(k in 1000u64..1_000_000, w in 1e-3f64..0.5) {
            let l = 0;
            let e0 = energy_test_epsilon(k, l, w, 1.0).unwrap();
            let e_k = energy_test_epsilon(k + 100, l, w, 1.0).unwrap();
            let e_w = energy_test_epsilon(k, l, w * 1.01, 1.0).unwrap();
            prop_assert!(e_k < e0 || e0 == 0.0);
            prop_assert!(e_w < e0 || e0 == 0.0);
        }

        #[test]
        fn norms_follow_m(m in 0.8f64..20.0) {
            prop_assert_eq!(norm_n(m), m * m - 0.5);
            prop_assert!((norm_n_sq(m) - (m.powi(4) - 0.5 * m * m)).abs() <= 1e-12 * m.powi(4));
        }
    }
}

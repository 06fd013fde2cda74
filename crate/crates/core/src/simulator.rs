//! Symbol-level stand-in for the optical layer: QPSK source, Gaussian
//! loss/noise channel and a trusted heterodyne detector.
//!
//! Randomness is drawn in fixed chunks of [`CHUNK`] symbols; chunk `c` uses
//! ChaCha stream `c` of the run seed, so any partition of the frame into
//! chunk-aligned ranges reproduces the sequential result bit for bit.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_4, SQRT_2};

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{alpha_from_means, NuSample};

pub const CHUNK: usize = 1 << 16;

// Stream offsets separating the label and noise generators of one seed.
const LABEL_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstellationSpec {
    pub amplitudes: [Complex64; 4],
    pub probabilities: [f64; 4],
}

impl ConstellationSpec {
    /// Uniform QPSK, α_k = |α|·e^{i(2k+1)π/4}.
    pub fn qpsk(alpha_mag: f64) -> Self {
        let amplitudes = core::array::from_fn(|k| Complex64::from_polar(alpha_mag, (2 * k + 1) as f64 * FRAC_PI_4));
        Self { amplitudes, probabilities: [0.25; 4] }
    }

    pub fn alpha_mag(&self) -> f64 {
        self.amplitudes[0].norm()
    }

    pub fn validate(&self) -> Result<()> {
        let s: f64 = self.probabilities.iter().sum();
        if self.probabilities.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (s - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter { field: "probabilities", reason: "must be a distribution" });
        }
        let a0 = self.alpha_mag();
        if self.amplitudes.iter().any(|a| (a.norm() - a0).abs() > 1e-12 * (1.0 + a0)) {
            return Err(Error::Parameter { field: "amplitudes", reason: "magnitudes must be equal" });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub eta_ch: f64,
    pub xi: f64,
    #[serde(rename = "eta_D")]
    pub eta_d: f64,
    pub nu_el: f64,
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_ch > 0.0 && self.eta_ch <= 1.0) {
            return Err(Error::Parameter { field: "eta_ch", reason: "must lie in (0,1]" });
        }
        if !(self.eta_d > 0.0 && self.eta_d <= 1.0) {
            return Err(Error::Parameter { field: "eta_D", reason: "must lie in (0,1]" });
        }
        if !(self.xi >= 0.0 && self.nu_el >= 0.0) {
            return Err(Error::Parameter { field: "xi/nu_el", reason: "must be ≥ 0" });
        }
        Ok(())
    }

    /// Total transmittance η_D·η_Ch.
    pub fn eta(&self) -> f64 {
        self.eta_d * self.eta_ch
    }

    /// Per-component variance of γ = (q+ip)/√2.
    pub fn gamma_component_variance(&self) -> f64 {
        0.5 * (1.0 + self.eta() * self.xi / 2.0 + self.nu_el)
    }
}

/// Alice's labels and Bob's outcomes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SymbolFrame {
    pub labels: Vec<u8>,
    pub outcomes: Vec<NuSample>,
}

impl SymbolFrame {
    pub fn new(labels: Vec<u8>, outcomes: Vec<NuSample>) -> Result<Self> {
        if labels.len() != outcomes.len() {
            return Err(Error::Length { expected: labels.len(), got: outcomes.len() });
        }
        if labels.iter().any(|&x| x > 3) {
            return Err(Error::InvalidSample("label out of range"));
        }
        Ok(Self { labels, outcomes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Sub-frame at the given positions (in the given order).
    pub fn select(&self, idx: &[usize]) -> SymbolFrame {
        SymbolFrame {
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            outcomes: idx.iter().map(|&i| self.outcomes[i]).collect(),
        }
    }
}

fn chunk_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_label(spec: &ConstellationSpec, u: f64) -> u8 {
    let mut acc = 0.0;
    for (k, &p) in spec.probabilities.iter().enumerate() {
        acc += p;
        if u < acc && p > 0.0 {
            return k as u8;
        }
    }
    spec.probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0) as u8
}

/// Labels drawn from an arbitrary byte source (the swap point for a
/// hardware random number generator).
pub fn prepare_from<R: RngCore>(n: usize, spec: &ConstellationSpec, source: &mut R) -> Result<Vec<u8>> {
    if n == 0 {
        return Err(Error::EmptyFrame);
    }
    spec.validate()?;
    Ok((0..n).map(|_| draw_label(spec, source.gen::<f64>())).collect())
}

/// Labels `[first, first + len)` of the seeded label sequence; `first` must be
/// chunk aligned.
pub fn prepare_range(first: usize, len: usize, spec: &ConstellationSpec, seed: u64) -> Vec<u8> {
    debug_assert_eq!(first % CHUNK, 0);
    let mut out = Vec::with_capacity(len);
    let mut c = first / CHUNK;
    while out.len() < len {
        let mut rng = chunk_rng(seed, LABEL_STREAM + c as u64);
        let take = CHUNK.min(len - out.len());
        out.extend((0..take).map(|_| draw_label(spec, rng.gen::<f64>())));
        c += 1;
    }
    out
}

pub fn prepare(n: usize, spec: &ConstellationSpec, seed: u64) -> Result<Vec<u8>> {
    if n == 0 {
        return Err(Error::EmptyFrame);
    }
    spec.validate()?;
    Ok(prepare_range(0, n, spec, seed))
}

/// Outcomes for labels occupying positions `[first, first + labels.len())`;
/// `first` must be chunk aligned.
pub fn transmit_range(first: usize, labels: &[u8], spec: &ConstellationSpec, model: &ChannelModel, seed: u64) -> Vec<NuSample> {
    debug_assert_eq!(first % CHUNK, 0);
    let gain = libm::sqrt(model.eta());
    // q = √2·Re γ, so σ_q = √2·σ_γ.
    let sigma_q = SQRT_2 * libm::sqrt(model.gamma_component_variance());
    let mut out = Vec::with_capacity(labels.len());
    for (c, chunk) in labels.chunks(CHUNK).enumerate() {
        let mut rng = chunk_rng(seed, NOISE_STREAM + (first / CHUNK + c) as u64);
        for &x in chunk {
            let mean = spec.amplitudes[x as usize] * gain * SQRT_2;
            let nq: f64 = rng.sample(StandardNormal);
            let np: f64 = rng.sample(StandardNormal);
            out.push(NuSample { q: mean.re + sigma_q * nq, p: mean.im + sigma_q * np });
        }
    }
    out
}

pub fn transmit_measure(labels: &[u8], spec: &ConstellationSpec, model: &ChannelModel, seed: u64) -> Result<SymbolFrame> {
    model.validate()?;
    spec.validate()?;
    let outcomes = transmit_range(0, labels, spec, model, seed);
    SymbolFrame::new(labels.to_vec(), outcomes)
}

/// Per-label sample means of γ.
pub fn label_centers(frame: &SymbolFrame) -> ([Complex64; 4], [usize; 4]) {
    let mut sum = [(0.0, 0.0); 4];
    let mut count = [0usize; 4];
    for (&x, s) in frame.labels.iter().zip(&frame.outcomes) {
        let k = x as usize;
        sum[k].0 += s.q;
        sum[k].1 += s.p;
        count[k] += 1;
    }
    let centers = core::array::from_fn(|k| {
        if count[k] == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            let n = count[k] as f64;
            Complex64::new(sum[k].0 / n, sum[k].1 / n) / SQRT_2
        }
    });
    (centers, count)
}

/// Back-to-back amplitude: mean |α̂| over the constellation points, measured
/// through the detector, so it converges to √η_D·|α|.
pub fn calibrate_b2b(spec: &ConstellationSpec, model: &ChannelModel, n: usize, seed: u64) -> Result<f64> {
    if n < 10_000 {
        return Err(Error::Calibration("at least 10^4 samples required"));
    }
    let b2b = ChannelModel { eta_ch: 1.0, ..*model };
    let labels = prepare(n, spec, seed)?;
    let frame = transmit_measure(&labels, spec, &b2b, seed)?;
    let mut sums = [(0.0, 0.0, 0usize); 4];
    for (&x, s) in frame.labels.iter().zip(&frame.outcomes) {
        let e = &mut sums[x as usize];
        e.0 += s.q;
        e.1 += s.p;
        e.2 += 1;
    }
    let mut total = 0.0;
    let mut used = 0;
    for (mq, mp, c) in sums {
        if c > 0 {
            total += alpha_from_means(mq / c as f64, mp / c as f64)?.norm();
            used += 1;
        }
    }
    Ok(total / used as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn stats(xs: impl Iterator<Item = f64>) -> (f64, f64) {
        let v: Vec<f64> = xs.collect();
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn prepare_frequencies_and_degenerate() {
        let spec = ConstellationSpec::qpsk(0.71);
        let labels = prepare(1_000_000, &spec, 11).unwrap();
        for k in 0..4u8 {
            let f = labels.iter().filter(|&&x| x == k).count() as f64 / 1e6;
            assert!((f - 0.25).abs() < 0.002, "label {k}: {f}");
        }
        let mut one = spec.clone();
        one.probabilities = [1.0, 0.0, 0.0, 0.0];
        assert!(prepare(1000, &one, 1).unwrap().iter().all(|&x| x == 0));
        assert!(prepare(4, &spec, 3).unwrap().iter().all(|&x| x < 4));
        assert_eq!(prepare(0, &spec, 3), Err(Error::EmptyFrame));
    }

    #[test]
    fn prepare_from_byte_source() {
        let spec = ConstellationSpec::qpsk(0.5);
        let mut src = ChaCha20Rng::seed_from_u64(9);
        let l = prepare_from(1000, &spec, &mut src).unwrap();
        assert_eq!(l.len(), 1000);
        assert!(l.iter().all(|&x| x < 4));
    }

    #[test]
    fn vacuum_statistics() {
        let spec = ConstellationSpec::qpsk(0.0);
        let model = ChannelModel { eta_ch: 1.0, xi: 0.0, eta_d: 1.0, nu_el: 0.0 };
        let labels = prepare(1_000_000, &spec, 1).unwrap();
        let f = transmit_measure(&labels, &spec, &model, 2).unwrap();
        let (mq, vq) = stats(f.outcomes.iter().map(|s| s.q));
        let (_, vp) = stats(f.outcomes.iter().map(|s| s.p));
        assert!(mq.abs() < 5e-3);
        // γ components have variance ½, so q = √2·Re γ has unit variance.
        assert_relative_eq!(vq, 1.0, max_relative = 0.01);
        assert_relative_eq!(vp, 1.0, max_relative = 0.01);
        let (_, vg) = stats(f.outcomes.iter().map(|s| s.gamma().re));
        assert_relative_eq!(vg, 0.5, max_relative = 0.01);
    }

    #[test]
    fn mean_amplitude_at_reference_channel() {
        let mut spec = ConstellationSpec::qpsk(0.71);
        spec.probabilities = [1.0, 0.0, 0.0, 0.0];
        let model = ChannelModel { eta_ch: 0.2764, xi: 0.0, eta_d: 0.6858, nu_el: 0.0 };
        let labels = prepare(1_000_000, &spec, 4).unwrap();
        let f = transmit_measure(&labels, &spec, &model, 5).unwrap();
        let (c, _) = label_centers(&f);
        let want = Complex64::from_polar((0.2764f64 * 0.6858).sqrt() * 0.71, FRAC_PI_4);
        assert!((c[0] - want).norm() / want.norm() < 0.01, "{:?} vs {want:?}", c[0]);
    }

    #[test]
    fn electronic_noise_variance() {
        let spec = ConstellationSpec::qpsk(0.0);
        let labels = prepare(1_000_000, &spec, 1).unwrap();
        for nu in [0.05, 0.1] {
            let model = ChannelModel { eta_ch: 1.0, xi: 0.0, eta_d: 1.0, nu_el: nu };
            let f = transmit_measure(&labels, &spec, &model, 8).unwrap();
            let (_, vq) = stats(f.outcomes.iter().map(|s| s.q));
            assert_relative_eq!(vq, 1.0 + nu, max_relative = 0.01);
        }
    }

    #[test]
    fn variance_slopes() {
        // Var(q) = 1 + ν_el + η·ξ/2: regress against ν_el and ξ separately.
        let spec = ConstellationSpec::qpsk(0.3);
        let labels = prepare(1_000_000, &spec, 21).unwrap();
        let var_at = |model: ChannelModel| {
            let f = transmit_measure(&labels, &spec, &model, 22).unwrap();
            let (c, _) = label_centers(&f);
            let v: f64 = f
                .labels
                .iter()
                .zip(&f.outcomes)
                .map(|(&x, s)| (s.gamma() - c[x as usize]).norm_sqr())
                .sum::<f64>()
                / f.len() as f64;
            v // E|γ̃|² = 2·component variance
        };
        let base = ChannelModel { eta_ch: 0.5, xi: 0.0, eta_d: 0.8, nu_el: 0.0 };
        let nus = [0.0, 0.5, 1.0];
        let v: Vec<f64> = nus.iter().map(|&nu| var_at(ChannelModel { nu_el: nu, ..base })).collect();
        let slope_nu = (v[2] - v[0]) / 1.0;
        assert_relative_eq!(slope_nu, 1.0, max_relative = 0.03);
        let xis = [0.0, 1.0, 2.0];
        let v: Vec<f64> = xis.iter().map(|&xi| var_at(ChannelModel { xi, ..base })).collect();
        let slope_xi = (v[2] - v[0]) / 2.0;
        assert_relative_eq!(slope_xi, base.eta() / 2.0, max_relative = 0.03);
    }

    #[test]
    fn deterministic_and_chunk_independent() {
        let spec = ConstellationSpec::qpsk(0.71);
        let model = ChannelModel { eta_ch: 0.3, xi: 0.01, eta_d: 0.7, nu_el: 0.02 };
        let n = 3 * CHUNK + 123;
        let labels = prepare(n, &spec, 77).unwrap();
        let a = transmit_measure(&labels, &spec, &model, 78).unwrap();
        let b = transmit_measure(&labels, &spec, &model, 78).unwrap();
        assert_eq!(a, b);
        let mut pieced = transmit_range(0, &labels[..CHUNK], &spec, &model, 78);
        pieced.extend(transmit_range(CHUNK, &labels[CHUNK..], &spec, &model, 78));
        assert_eq!(pieced, a.outcomes);
        let mut lp = prepare_range(0, 2 * CHUNK, &spec, 77);
        lp.extend(prepare_range(2 * CHUNK, n - 2 * CHUNK, &spec, 77));
        assert_eq!(lp, labels);
    }

    #[test]
    fn phase_symmetry() {
        // Rotating by π/2 and relabeling k → k+1 gives the same outcome law.
        let spec = ConstellationSpec::qpsk(0.8);
        let model = ChannelModel { eta_ch: 0.5, xi: 0.05, eta_d: 0.8, nu_el: 0.02 };
        let labels = prepare(400_000, &spec, 5).unwrap();
        let f = transmit_measure(&labels, &spec, &model, 6).unwrap();
        let shifted: Vec<u8> = labels.iter().map(|&x| (x + 1) % 4).collect();
        let g = transmit_measure(&shifted, &spec, &model, 7).unwrap();
        let rot = Complex64::new(0.0, 1.0);
        let (cf, _) = label_centers(&f);
        let (cg, _) = label_centers(&g);
        for k in 0..4 {
            assert!((cf[k] * rot - cg[(k + 1) % 4]).norm() < 0.01);
        }
        let (_, vf) = stats(f.outcomes.iter().map(|s| s.q * s.q + s.p * s.p));
        let (_, vg) = stats(g.outcomes.iter().map(|s| s.q * s.q + s.p * s.p));
        assert_relative_eq!(vf, vg, max_relative = 0.02);
    }

    #[test]
    fn b2b_calibration() {
        let spec = ConstellationSpec::qpsk(0.71);
        let ideal = ChannelModel { eta_ch: 1.0, xi: 0.0, eta_d: 1.0, nu_el: 0.0 };
        assert!((calibrate_b2b(&spec, &ideal, 400_000, 1).unwrap() - 0.71).abs() < 0.01);
        let lossy = ChannelModel { eta_d: 0.25, ..ideal };
        assert_relative_eq!(calibrate_b2b(&spec, &lossy, 1_000_000, 2).unwrap(), 0.355, max_relative = 0.01);
        let zero = calibrate_b2b(&ConstellationSpec::qpsk(0.0), &ideal, 400_000, 3).unwrap();
        // mean of four |N(0, 1/(2·10^5))|-sized estimates
        assert!(zero < 3.0 * (1.0f64 / 100_000.0).sqrt());
        assert!(calibrate_b2b(&spec, &ideal, 100, 1).is_err());
    }
}

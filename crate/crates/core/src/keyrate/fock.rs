//! Truncated Fock-space operators: coherent states, Alice's reduced state,
//! displaced number operators and the key-map region operators.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::simulator::ConstellationSpec;
use crate::special::{gamma_pq, gauss_legendre, laguerre, ln_factorial, ln_gamma};

/// Fock amplitudes ⟨n|α⟩ for n < d (not renormalized).
pub fn coherent_vector(alpha: C64, d: usize) -> Vec<C64> {
    let a2 = alpha.norm_sqr();
    let mut out = Vec::with_capacity(d);
    let mut amp = C64::new(libm::exp(-0.5 * a2), 0.0);
    for n in 0..d {
        if n > 0 {
            amp = amp * alpha / libm::sqrt(n as f64);
        }
        out.push(amp);
    }
    out
}

/// ⟨α|β⟩
pub fn coherent_overlap(alpha: C64, beta: C64) -> C64 {
    (-0.5 * alpha.norm_sqr() - 0.5 * beta.norm_sqr() + alpha.conj() * beta).exp()
}

/// ⟨j|ρ_A|i⟩ = √(p_i p_j)·⟨α_i|α_j⟩.
pub fn build_rho_a(spec: &ConstellationSpec) -> CMat {
    let p = &spec.probabilities;
    let a = &spec.amplitudes;
    CMat::from_fn(4, 4, |j, i| coherent_overlap(a[i], a[j]) * libm::sqrt(p[i] * p[j]))
}

/// Truncated annihilation operator on d levels.
pub fn annihilation(d: usize) -> CMat {
    CMat::from_fn(d, d, |r, c| if c == r + 1 { C64::new(libm::sqrt(c as f64), 0.0) } else { C64::new(0.0, 0.0) })
}

// (a − β)†(a − β) on d levels; exact compression of the infinite operator.
fn displaced_number_dim(beta: C64, d: usize) -> CMat {
    let a = annihilation(d);
    let mut s = a.clone();
    for i in 0..d {
        s[(i, i)] -= beta;
    }
    s.adjoint().matmul(&s)
}

/// Π·n̂_β·Π with n̂_β = (a − β)†(a − β), Π the projector onto n ≤ n_c.
pub fn displaced_number(beta: C64, n_c: usize) -> CMat {
    let n = displaced_number_dim(beta, n_c + 2);
    n.sub_matrix(0, 0, n_c + 1, n_c + 1)
}

/// Π·n̂_β²·Π. n̂_β raises the photon number by at most one, so squaring the
/// compression to n_c+1 photons and truncating is exact.
pub fn displaced_number_sq(beta: C64, n_c: usize) -> CMat {
    let n = displaced_number_dim(beta, n_c + 2);
    n.matmul(&n).sub_matrix(0, 0, n_c + 1, n_c + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionOperators {
    pub delta_r: f64,
    pub m: f64,
    pub n_c: usize,
    pub r: [CMat; 4],
    pub r_perp: CMat,
    /// Thermal photons of the detector-noise smearing; zero for the ideal
    /// heterodyne POVM.
    #[serde(default)]
    pub noise_photons: f64,
}

// ∫_{Δ²}^{M²} u^{k−1} e^{−u} du / Γ(k), computed from whichever tail keeps
// precision.
fn annulus_mass(k: f64, delta_r: f64, m: f64) -> f64 {
    let (p_d, q_d) = gamma_pq(k, delta_r * delta_r);
    let (p_m, q_m) = if m.is_infinite() { (1.0, 0.0) } else { gamma_pq(k, m * m) };
    if p_m <= 0.5 {
        p_m - p_d
    } else {
        q_d - q_m
    }
}

/// R_z = (1/π)∫_{sector z, Δ_r ≤ |γ| ≤ M} |γ⟩⟨γ| d²γ restricted to n ≤ n_c,
/// and R_⊥ over the complement (inner disk and outer region).
pub fn region_operators(delta_r: f64, m: f64, n_c: usize) -> Result<RegionOperators> {
    if !(delta_r >= 0.0 && delta_r < m) {
        return Err(Error::Parameter { field: "delta_r", reason: "must satisfy 0 ≤ delta_r < M" });
    }
    if n_c < 1 {
        return Err(Error::Parameter { field: "n_c", reason: "must be ≥ 1" });
    }
    let d = n_c + 1;
    // radial[m][n] = ½·Γ(k)·[P(k,M²) − P(k,Δ²)]/√(m!n!), k = (m+n)/2 + 1
    let mut radial = alloc::vec![0.0; d * d];
    for i in 0..d {
        for j in i..d {
            let k = (i + j) as f64 / 2.0 + 1.0;
            let mass = annulus_mass(k, delta_r, m);
            let v = if mass > 0.0 {
                0.5 * mass * libm::exp(ln_gamma(k) - 0.5 * (ln_factorial(i) + ln_factorial(j)))
            } else {
                0.0
            };
            radial[i * d + j] = v;
            radial[j * d + i] = v;
        }
    }
    let perp: Vec<f64> = (0..d)
        .map(|n| {
            let k = n as f64 + 1.0;
            let inner = gamma_pq(k, delta_r * delta_r).0;
            let outer = if m.is_infinite() { 0.0 } else { gamma_pq(k, m * m).1 };
            inner + outer
        })
        .collect();
    Ok(assemble(delta_r, m, n_c, &radial, &perp, 0.0))
}

// R_z[m][n] = A_mn(z)·radial[m][n] with the sector factor
// A_mn = (1/π)∫_z e^{i(m−n)θ} dθ; the full circle gives R_⊥ = diag(perp).
fn assemble(delta_r: f64, m: f64, n_c: usize, radial: &[f64], perp: &[f64], noise_photons: f64) -> RegionOperators {
    let d = n_c + 1;
    let r = core::array::from_fn(|z| {
        let (a, b) = (z as f64 * FRAC_PI_2, (z + 1) as f64 * FRAC_PI_2);
        CMat::from_fn(d, d, |i, j| {
            let dm = i as f64 - j as f64;
            let ang = if i == j {
                C64::new((b - a) / PI, 0.0)
            } else {
                (C64::new(0.0, dm * b).exp() - C64::new(0.0, dm * a).exp()) / C64::new(0.0, dm * PI)
            };
            ang * radial[i * d + j]
        })
    });
    RegionOperators { delta_r, m, n_c, r, r_perp: CMat::from_diag(perp), noise_photons }
}

/// Thermal photon number n̄ with η_D·(1 + n̄) = 1 + ν_el: the trusted
/// detector's outcome density for input |β⟩ is that of an ideal heterodyne
/// measurement of |√η_D·β⟩ smeared by ν_el, which equals an ideal measurement
/// of |β⟩ against displaced thermal states of n̄ photons, rescaled by √η_D.
pub fn detector_noise_photons(eta_d: f64, nu_el: f64) -> f64 {
    (1.0 + nu_el) / eta_d - 1.0
}

/// ⟨m|D(r)|k⟩ for real r ≥ 0, m < rows, k < cols.
pub fn displacement_elements(r: f64, rows: usize, cols: usize) -> Vec<f64> {
    let mut out = alloc::vec![0.0; rows * cols];
    if r == 0.0 {
        for i in 0..rows.min(cols) {
            out[i * cols + i] = 1.0;
        }
        return out;
    }
    let x = r * r;
    let lx = libm::log(x);
    for m in 0..rows {
        for k in 0..cols {
            let (lo, hi) = (m.min(k), m.max(k));
            let a = (hi - lo) as f64;
            let mag = libm::exp(-0.5 * x + 0.5 * a * lx + 0.5 * (ln_factorial(lo) - ln_factorial(hi)));
            let sign = if k > m && (k - m) % 2 == 1 { -1.0 } else { 1.0 };
            out[m * cols + k] = sign * mag * laguerre(lo, a, x);
        }
    }
    out
}

// Panel width and rule for the radial integrals; the integrands are entire
// functions of r varying on the scale of one unit.
const PANEL: f64 = 0.25;
const NODES: usize = 20;

/// Region operators of the trusted detector (efficiency η_D, electronic
/// noise ν_el), acting on the state at the detector input:
/// R_z = (1/π)∫ D(μ)τD(μ)† d²μ over the region scaled by 1/√η_D, τ thermal
/// with `detector_noise_photons` photons. η_D = 1, ν_el = 0 gives the ideal
/// operators.
pub fn trusted_region_operators(delta_r: f64, m: f64, n_c: usize, eta_d: f64, nu_el: f64) -> Result<RegionOperators> {
    if !(delta_r >= 0.0 && delta_r < m) || m.is_infinite() {
        return Err(Error::Parameter { field: "delta_r", reason: "must satisfy 0 ≤ delta_r < M < ∞" });
    }
    if n_c < 1 {
        return Err(Error::Parameter { field: "n_c", reason: "must be ≥ 1" });
    }
    if !(eta_d > 0.0 && eta_d <= 1.0 && nu_el >= 0.0) {
        return Err(Error::Parameter { field: "eta_D", reason: "need 0 < η_D ≤ 1 and ν_el ≥ 0" });
    }
    let nbar = detector_noise_photons(eta_d, nu_el);
    if nbar <= 1e-12 {
        let mut ro = region_operators(delta_r, m, n_c)?;
        ro.noise_photons = nbar.max(0.0);
        return Ok(ro);
    }
    let d = n_c + 1;
    // thermal weights down to 1e-18
    let ratio = nbar / (1.0 + nbar);
    let kmax = (1 + (libm::log(1e-18) / libm::log(ratio)) as usize).max(1);
    let weights: Vec<f64> = (0..kmax).map(|k| libm::pow(ratio, k as f64) / (1.0 + nbar)).collect();
    let s = 1.0 / libm::sqrt(eta_d);
    let (a, b) = (delta_r * s, m * s);
    let r_max = b + libm::sqrt((kmax + d) as f64) + 12.0 * libm::sqrt(1.0 + 2.0 * nbar);
    let (gx, gw) = gauss_legendre(NODES);
    // ∫ F_mn(r)·r dr over [lo, hi], F = D(r)τD(r)†
    let integrate = |lo: f64, hi: f64| -> Vec<f64> {
        let mut acc = alloc::vec![0.0; d * d];
        if hi <= lo {
            return acc;
        }
        let panels = libm::ceil((hi - lo) / PANEL).max(1.0) as usize;
        let h = (hi - lo) / panels as f64;
        for p in 0..panels {
            let c = lo + (p as f64 + 0.5) * h;
            for (&t, &wt) in gx.iter().zip(&gw) {
                let r = c + 0.5 * h * t;
                let el = displacement_elements(r, d, kmax);
                let wr = 0.5 * h * wt * r;
                for i in 0..d {
                    for j in i..d {
                        let f: f64 = (0..kmax).map(|k| weights[k] * el[i * kmax + k] * el[j * kmax + k]).sum();
                        acc[i * d + j] += wr * f;
                    }
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                acc[i * d + j] = acc[j * d + i];
            }
        }
        acc
    };
    let radial = integrate(a, b);
    let inner = integrate(0.0, a);
    let outer = integrate(b, r_max);
    let perp: Vec<f64> = (0..d).map(|n| 2.0 * (inner[n * d + n] + outer[n * d + n])).collect();
    Ok(assemble(delta_r, m, n_c, &radial, &perp, nbar))
}

impl RegionOperators {
    pub fn dim(&self) -> usize {
        self.n_c + 1
    }

    /// ‖Σ_z R_z + R_⊥ − I‖_F
    pub fn completeness_error(&self) -> f64 {
        let mut s = self.r_perp.clone();
        for rz in &self.r {
            s = s.add(rz);
        }
        s.sub(&CMat::identity(self.dim())).norm_fro()
    }

    /// Σ_z R_z
    pub fn kept(&self) -> CMat {
        let mut s = self.r[0].clone();
        for rz in &self.r[1..] {
            s = s.add(rz);
        }
        s
    }
}

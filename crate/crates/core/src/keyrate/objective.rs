//! Conditional entropy H(Z|E) of Bob's key register as a function of ρ̄.
//!
//! f(ρ) = D(G(ρ)‖Z(G(ρ))) with G(ρ) = KρK†, K = Σ_z |z⟩⊗I_A⊗√R_z and Z the
//! pinching on the key register. KρK† and B½ρB½ (B = K†K = I⊗ΣR_z) share
//! their nonzero spectrum, and each pinched block shares its spectrum with
//! C_zρC_z (C_z = I⊗√R_z), so everything is evaluated at dimension
//! 4(n_c+1):
//!
//!   f(ρ) = [Tr g(B½ρB½) − Σ_z Tr g(C_zρC_z)]/ln 2,   g(x) = x ln x,
//!   ∇f  = [B½ log(B½ρB½) B½ − Σ_z C_z log(C_zρC_z) C_z]/ln 2.

use alloc::vec::Vec;
use core::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::keyrate::fock::RegionOperators;
use crate::linalg::{eigh, eigvalsh, CMat};

pub const DEFAULT_EPS_PERT: f64 = 1e-12;

/// Most negative eigenvalue of B½ρB½ tolerated as rounding.
const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Objective {
    d_a: usize,
    sqrt_b: CMat,
    sqrt_r: [CMat; 4],
    pub eps_pert: f64,
}

#[derive(Debug, Clone)]
pub struct ValueGrad {
    pub value: f64,
    pub grad: CMat,
    /// Eigenvalues lifted to `eps_pert` inside the matrix logarithms.
    pub clamps: usize,
}

fn psd_sqrt(a: &CMat) -> CMat {
    eigh(a).apply(|l| libm::sqrt(l.max(0.0)))
}

// (I_dA ⊗ s)·ρ·(I_dA ⊗ s) block by block.
fn sandwich(s: &CMat, rho: &CMat, d_a: usize) -> CMat {
    let d = s.dim();
    let mut out = CMat::zeros(d_a * d, d_a * d);
    for i in 0..d_a {
        for j in i..d_a {
            let blk = s.matmul(&rho.sub_matrix(i * d, j * d, d, d)).matmul(s);
            for r in 0..d {
                for c in 0..d {
                    out[(i * d + r, j * d + c)] = blk[(r, c)];
                    if i != j {
                        out[(j * d + c, i * d + r)] = blk[(r, c)].conj();
                    }
                }
            }
        }
    }
    out
}

fn xlogx(l: f64) -> f64 {
    if l > 0.0 {
        l * libm::log(l)
    } else {
        0.0
    }
}

impl Objective {
    pub fn new(regions: &RegionOperators, eps_pert: f64) -> Self {
        Self {
            d_a: 4,
            sqrt_b: psd_sqrt(&regions.kept()),
            sqrt_r: core::array::from_fn(|z| psd_sqrt(&regions.r[z])),
            eps_pert,
        }
    }

    pub fn dim(&self) -> usize {
        self.d_a * self.sqrt_b.dim()
    }

    fn check(&self, rho: &CMat) -> Result<()> {
        if rho.dim() != self.dim() {
            return Err(Error::Length { expected: self.dim(), got: rho.dim() });
        }
        Ok(())
    }

    fn min_check(&self, values: &[f64]) -> Result<()> {
        if values.first().is_some_and(|&l| l < -PSD_TOL) {
            return Err(Error::Domain("state is not positive semidefinite"));
        }
        Ok(())
    }

    /// f(ρ) in bits.
    pub fn value(&self, rho: &CMat) -> Result<f64> {
        self.check(rho)?;
        let lb = eigvalsh(&sandwich(&self.sqrt_b, rho, self.d_a));
        self.min_check(&lb)?;
        let mut v: f64 = lb.iter().map(|&l| xlogx(l)).sum();
        for c in &self.sqrt_r {
            v -= eigvalsh(&sandwich(c, rho, self.d_a)).iter().map(|&l| xlogx(l)).sum::<f64>();
        }
        Ok(v / LN_2)
    }

    pub fn value_grad(&self, rho: &CMat) -> Result<ValueGrad> {
        self.check(rho)?;
        let eps = self.eps_pert;
        let mut clamps = 0;
        let mut log_clamped = |l: f64| {
            if l < eps {
                clamps += 1;
            }
            libm::log(l.max(eps))
        };
        let eb = eigh(&sandwich(&self.sqrt_b, rho, self.d_a));
        self.min_check(&eb.values)?;
        let mut value: f64 = eb.values.iter().map(|&l| xlogx(l)).sum();
        let mut grad = sandwich(&self.sqrt_b, &eb.apply(&mut log_clamped), self.d_a);
        for c in &self.sqrt_r {
            let ez = eigh(&sandwich(c, rho, self.d_a));
            value -= ez.values.iter().map(|&l| xlogx(l)).sum::<f64>();
            grad = grad.sub(&sandwich(c, &ez.apply(&mut log_clamped), self.d_a));
        }
        Ok(ValueGrad { value: value / LN_2, grad: grad.scale(1.0 / LN_2), clamps })
    }

    /// Probability of a kept (non-⊥) outcome, Tr[(I⊗ΣR_z)ρ].
    pub fn kept_probability(&self, rho: &CMat) -> f64 {
        let b = self.sqrt_b.matmul(&self.sqrt_b);
        let d = b.dim();
        let mut s = 0.0;
        for i in 0..self.d_a {
            s += b.inner(&rho.sub_matrix(i * d, i * d, d, d));
        }
        s
    }
}

/// Pure state |ψ⟩ on A⊗B: f = H(p) + p_kept·log₂ p_kept with
/// p_z = ⟨ψ|I⊗R_z|ψ⟩ and H the (unnormalized) Shannon sum −Σ p_z log₂ p_z.
pub fn pure_state_entropy(psi: &[crate::linalg::C64], regions: &RegionOperators) -> f64 {
    let d = regions.dim();
    let expect = |op: &CMat| -> f64 {
        let mut s = 0.0;
        for a in 0..psi.len() / d {
            let v = &psi[a * d..(a + 1) * d];
            for i in 0..d {
                for j in 0..d {
                    s += (v[i].conj() * op[(i, j)] * v[j]).re;
                }
            }
        }
        s
    };
    let p: Vec<f64> = regions.r.iter().map(expect).collect();
    let kept: f64 = p.iter().sum();
    let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * libm::log2(x)).sum();
    h + if kept > 0.0 { kept * libm::log2(kept) } else { 0.0 }
}

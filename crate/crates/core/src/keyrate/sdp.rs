//! Block SDP in standard form over Hermitian matrices,
//!
//!   min Σ_k ⟨C_k, X_k⟩  s.t.  Σ_k ⟨A_ik, X_k⟩ = b_i,  X_k ⪰ 0,
//!
//! with ⟨A, X⟩ = Re Tr(A·X). Solved by an infeasible primal-dual
//! path-following method (HKM direction, Mehrotra predictor-corrector).
//! Diagonal blocks whose constraints touch only the diagonal stay diagonal,
//! which is how scalar slack variables are carried.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, eigh, eigvalsh, inverse_from_cholesky, solve_lower, solve_real_spd, CMat, C64};

/// A Hermitian constraint matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    /// Σ v·E_rc; Hermitian partners must be listed explicitly.
    Sparse(Vec<(usize, usize, C64)>),
    /// Σ v·E_ab ⊗ X on blocks of size `d`; `x = None` is the identity.
    Kron { d: usize, entries: Vec<(usize, usize, C64)>, x: Option<CMat> },
}

impl Op {
    /// Re Tr(A·T) for any square T.
    pub fn apply(&self, t: &CMat) -> f64 {
        match self {
            Op::Sparse(es) => es.iter().map(|&(r, c, v)| (v * t[(c, r)]).re).sum(),
            Op::Kron { d, entries, x } => {
                let d = *d;
                let mut s = 0.0;
                for &(a, b, v) in entries {
                    let mut acc = C64::new(0.0, 0.0);
                    match x {
                        None => {
                            for k in 0..d {
                                acc += t[(b * d + k, a * d + k)];
                            }
                        }
                        Some(x) => {
                            for k in 0..d {
                                for l in 0..d {
                                    acc += x[(k, l)] * t[(b * d + l, a * d + k)];
                                }
                            }
                        }
                    }
                    s += (v * acc).re;
                }
                s
            }
        }
    }

    /// Y += s·A
    pub fn add_to(&self, y: &mut CMat, s: f64) {
        match self {
            Op::Sparse(es) => {
                for &(r, c, v) in es {
                    y[(r, c)] += v * s;
                }
            }
            Op::Kron { d, entries, x } => {
                let d = *d;
                for &(a, b, v) in entries {
                    let vs = v * s;
                    match x {
                        None => {
                            for k in 0..d {
                                y[(a * d + k, b * d + k)] += vs;
                            }
                        }
                        Some(x) => {
                            for k in 0..d {
                                for l in 0..d {
                                    y[(a * d + k, b * d + l)] += vs * x[(k, l)];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// X·A·W
    fn sandwich(&self, xm: &CMat, w: &CMat) -> CMat {
        let n = xm.dim();
        let mut out = CMat::zeros(n, n);
        match self {
            Op::Sparse(es) => {
                for &(r, c, v) in es {
                    for i in 0..n {
                        let xv = xm[(i, r)] * v;
                        if xv.re == 0.0 && xv.im == 0.0 {
                            continue;
                        }
                        let wrow = w.row(c);
                        for j in 0..n {
                            out[(i, j)] += xv * wrow[j];
                        }
                    }
                }
            }
            Op::Kron { d, entries, x } => {
                let d = *d;
                for &(a, b, v) in entries {
                    // L = X[:, a-block]·x·v  (n × d)
                    let mut l = CMat::zeros(n, d);
                    for i in 0..n {
                        for k in 0..d {
                            match x {
                                None => l[(i, k)] = xm[(i, a * d + k)] * v,
                                Some(xx) => {
                                    let mut s = C64::new(0.0, 0.0);
                                    for m in 0..d {
                                        s += xm[(i, a * d + m)] * xx[(m, k)];
                                    }
                                    l[(i, k)] = s * v;
                                }
                            }
                        }
                    }
                    for i in 0..n {
                        let orow = &mut out.data_mut()[i * n..(i + 1) * n];
                        for k in 0..d {
                            let lik = l[(i, k)];
                            let wrow = w.row(b * d + k);
                            for j in 0..n {
                                orow[j] += lik * wrow[j];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn to_dense(&self, n: usize) -> CMat {
        let mut y = CMat::zeros(n, n);
        self.add_to(&mut y, 1.0);
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, Op)>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub dims: Vec<usize>,
    pub c: Vec<CMat>,
    pub constraints: Vec<Constraint>,
    /// A-priori bounds on Tr X_k over the feasible set (for the certified
    /// dual bound).
    pub trace_bounds: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Stop as soon as the iterate is feasible and μ falls below this value
    /// (used to obtain a well-centered interior point).
    pub stop_mu: Option<f64>,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 100, stop_mu: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: Vec<CMat>,
    pub y: Vec<f64>,
    pub z: Vec<CMat>,
    pub primal: f64,
    pub dual: f64,
    pub status: SdpStatus,
    pub iterations: usize,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
}

impl SdpProblem {
    pub fn validate(&self) -> Result<()> {
        let nb = self.dims.len();
        if self.c.len() != nb || self.trace_bounds.len() != nb {
            return Err(Error::Construction("block count mismatch".into()));
        }
        for (k, c) in self.c.iter().enumerate() {
            if c.dim() != self.dims[k] || c.rows() != c.cols() {
                return Err(Error::Construction(alloc::format!("cost block {k} has the wrong size")));
            }
        }
        for (i, con) in self.constraints.iter().enumerate() {
            for (k, op) in &con.terms {
                if *k >= nb {
                    return Err(Error::Construction(alloc::format!("constraint {i} names block {k}")));
                }
                let n = self.dims[*k];
                let ok = match op {
                    Op::Sparse(es) => es.iter().all(|&(r, c, _)| r < n && c < n),
                    Op::Kron { d, entries, x } => {
                        n.is_multiple_of(*d)
                            && entries.iter().all(|&(a, b, _)| a < n / d && b < n / d)
                            && x.as_ref().is_none_or(|x| x.dim() == *d)
                    }
                };
                if !ok {
                    return Err(Error::Construction(alloc::format!("constraint {i} does not fit block {k}")));
                }
            }
        }
        Ok(())
    }

    /// A(X)
    pub fn apply(&self, x: &[CMat]) -> Vec<f64> {
        self.constraints.iter().map(|con| con.terms.iter().map(|(k, op)| op.apply(&x[*k])).sum()).collect()
    }

    /// C − Aᵀy
    pub fn dual_slack(&self, y: &[f64]) -> Vec<CMat> {
        let mut z = self.c.clone();
        for (con, &yi) in self.constraints.iter().zip(y) {
            for (k, op) in &con.terms {
                op.add_to(&mut z[*k], -yi);
            }
        }
        z
    }

    pub fn objective(&self, x: &[CMat]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c.inner(x)).sum()
    }

    /// bᵀy + Σ_k min(0, λ_min(Z_k))·T_k with Z = C − Aᵀy recomputed from y:
    /// a lower bound on the primal optimum for any y.
    pub fn certified_lower_bound(&self, y: &[f64]) -> f64 {
        let by: f64 = self.constraints.iter().zip(y).map(|(c, yi)| c.b * yi).sum();
        let corr: f64 = self
            .dual_slack(y)
            .iter()
            .zip(&self.trace_bounds)
            .map(|(z, t)| eigvalsh(&z.hermitian_part())[0].min(0.0) * t)
            .sum();
        by + corr
    }
}

// Largest α with X + α·dX ⪰ 0 given the Cholesky factor of X; values
// beyond `cap` are reported as infinite.
fn max_step(x: &CMat, l: &CMat, dx: &CMat, cap: f64) -> f64 {
    if cholesky(&x.add(&dx.scale(cap))).is_some() {
        return f64::INFINITY;
    }
    let t = solve_lower(l, dx);
    let w = solve_lower(l, &t.adjoint());
    let lmin = eigvalsh(&w.hermitian_part())[0];
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

const STEP_FRACTION: f64 = 0.98;

// Common block size when every operator on a block is a Kron operator.
fn kron_only(ops: &[(usize, &Op)]) -> Option<usize> {
    let mut d = None;
    for (_, op) in ops {
        match op {
            Op::Kron { d: dk, .. } if d.is_none_or(|d| d == *dk) => d = Some(*dk),
            _ => return None,
        }
    }
    d
}

fn trace_prod(a: &CMat, b: &CMat) -> C64 {
    let n = a.rows();
    let mut s = C64::new(0.0, 0.0);
    for r in 0..n {
        let ar = a.row(r);
        for (c, &v) in ar.iter().enumerate() {
            s += v * b[(c, r)];
        }
    }
    s
}

// Upper triangle of the Schur complement for Kron operators on one block:
// the (a,b,v;Y) × (c,e,u;Y') term is v·u·Tr(Y·X_bc · Y'·W_ea), W = Z⁻¹.
fn schur_kron(ops: &[(usize, &Op)], d: usize, x: &CMat, w: &CMat, m: usize, schur: &mut [f64]) {
    let nbk = x.dim() / d;
    let xb: Vec<CMat> = (0..nbk * nbk).map(|i| x.sub_matrix((i / nbk) * d, (i % nbk) * d, d, d)).collect();
    let wb: Vec<CMat> = (0..nbk * nbk).map(|i| w.sub_matrix((i / nbk) * d, (i % nbk) * d, d, d)).collect();
    // Per operator and entry: left factors Y·X_bc over c, right factors Y·W_ea over a.
    struct Side {
        idx: usize,
        terms: Vec<(usize, usize, C64, Vec<CMat>, Vec<CMat>)>,
    }
    let sides: Vec<Side> = ops
        .iter()
        .map(|&(idx, op)| {
            let Op::Kron { entries, x: y, .. } = op else { unreachable!() };
            let terms = entries
                .iter()
                .map(|&(a, b, v)| {
                    let left = (0..nbk)
                        .map(|c| match y {
                            None => xb[b * nbk + c].clone(),
                            Some(y) => y.matmul(&xb[b * nbk + c]),
                        })
                        .collect();
                    let right = (0..nbk)
                        .map(|aa| match y {
                            None => wb[b * nbk + aa].clone(),
                            Some(y) => y.matmul(&wb[b * nbk + aa]),
                        })
                        .collect();
                    (a, b, v, left, right)
                })
                .collect();
            Side { idx, terms }
        })
        .collect();
    for sj in &sides {
        for si in &sides {
            if si.idx > sj.idx {
                continue;
            }
            let mut acc = 0.0;
            for (a, _, v, left, _) in &si.terms {
                for (c, _, u, _, right) in &sj.terms {
                    // entry (c, e) of A_j: right[a] holds Y'·W_ea with e = its column index.
                    acc += (*v * *u * trace_prod(&left[*c], &right[*a])).re;
                }
            }
            schur[si.idx * m + sj.idx] += acc;
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

pub fn solve(p: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution> {
    p.validate()?;
    let nb = p.dims.len();
    let m = p.constraints.len();
    let n_tot: usize = p.dims.iter().sum();
    let b: Vec<f64> = p.constraints.iter().map(|c| c.b).collect();
    let b_norm = norm2(&b);
    let c_norm = p.c.iter().map(|c| c.norm_fro()).fold(0.0, f64::max);
    // Constraints grouped by block for the Schur complement.
    let mut by_block: Vec<Vec<(usize, &Op)>> = vec![Vec::new(); nb];
    for (i, con) in p.constraints.iter().enumerate() {
        for (k, op) in &con.terms {
            by_block[*k].push((i, op));
        }
    }

    let mut x: Vec<CMat> = p.dims.iter().map(|&n| CMat::identity(n)).collect();
    let z0 = 1.0 + c_norm;
    let mut z: Vec<CMat> = p.dims.iter().map(|&n| CMat::identity(n).scale(z0)).collect();
    let mut y = vec![0.0; m];
    let mut status = SdpStatus::MaxIter;
    let mut iterations = 0;
    let mut pinf = f64::INFINITY;
    let mut dinf = f64::INFINITY;

    for it in 0..settings.max_iter {
        iterations = it;
        let ax = p.apply(&x);
        let rp: Vec<f64> = (0..m).map(|i| b[i] - ax[i]).collect();
        let mut rd = p.dual_slack(&y);
        for k in 0..nb {
            rd[k] = rd[k].sub(&z[k]);
        }
        let xz: f64 = (0..nb).map(|k| x[k].inner(&z[k])).sum();
        let mu = xz / n_tot as f64;
        let pobj = p.objective(&x);
        let dobj: f64 = b.iter().zip(&y).map(|(bi, yi)| bi * yi).sum();
        pinf = norm2(&rp) / (1.0 + b_norm);
        dinf = rd.iter().map(|r| r.norm_fro()).fold(0.0, f64::max) / (1.0 + c_norm);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let feasible = pinf < settings.tol && dinf < settings.tol;
        if feasible && gap < settings.tol {
            status = SdpStatus::Optimal;
            break;
        }
        if let Some(target) = settings.stop_mu {
            if pinf < settings.tol && mu < target {
                status = SdpStatus::Optimal;
                break;
            }
        }
        if !(mu.is_finite()) || x.iter().any(|xk| xk.max_abs() > 1e12) {
            status = SdpStatus::Infeasible;
            break;
        }

        let mut lx = Vec::with_capacity(nb);
        let mut lz = Vec::with_capacity(nb);
        let mut zinv = Vec::with_capacity(nb);
        for k in 0..nb {
            let (Some(l1), Some(l2)) = (cholesky(&x[k]), cholesky(&z[k])) else {
                return finish(p, x, y, z, SdpStatus::MaxIter, it, pinf, dinf);
            };
            lx.push(l1);
            zinv.push(inverse_from_cholesky(&l2));
            lz.push(l2);
        }

        // Schur complement M_ij = Σ_k ⟨A_ik, X_k·A_jk·Z_k⁻¹⟩
        let mut schur = vec![0.0; m * m];
        for k in 0..nb {
            if let Some(d) = kron_only(&by_block[k]) {
                schur_kron(&by_block[k], d, &x[k], &zinv[k], m, &mut schur);
                continue;
            }
            for &(j, opj) in &by_block[k] {
                let t = opj.sandwich(&x[k], &zinv[k]);
                for &(i, opi) in &by_block[k] {
                    if i <= j {
                        schur[i * m + j] += opi.apply(&t);
                    }
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                schur[i * m + j] = schur[j * m + i];
            }
        }
        let scale = (0..m).map(|i| schur[i * m + i].abs()).fold(0.0, f64::max).max(1e-300);
        let solve_m = |rhs: &[f64]| -> Option<Vec<f64>> {
            solve_real_spd(&schur, m, rhs).or_else(|| {
                let mut reg = schur.clone();
                for i in 0..m {
                    reg[i * m + i] += 1e-14 * scale;
                }
                solve_real_spd(&reg, m, rhs)
            })
        };

        // Directions for complementarity target σμ and second-order term.
        let xrdz: Vec<CMat> = (0..nb).map(|k| x[k].matmul(&rd[k]).matmul(&zinv[k])).collect();
        let direction = |sigma_mu: f64, corr: Option<&[CMat]>| -> Option<(Vec<CMat>, Vec<f64>, Vec<CMat>)> {
            let g: Vec<CMat> = (0..nb)
                .map(|k| {
                    let mut gk = x[k].add(&xrdz[k]).sub(&zinv[k].scale(sigma_mu));
                    if let Some(c) = corr {
                        gk = gk.add(&c[k]);
                    }
                    gk
                })
                .collect();
            let ag = p.apply(&g);
            let rhs: Vec<f64> = (0..m).map(|i| rp[i] + ag[i]).collect();
            let dy = solve_m(&rhs)?;
            let mut dz = rd.clone();
            for (con, &dyi) in p.constraints.iter().zip(&dy) {
                for (k, op) in &con.terms {
                    op.add_to(&mut dz[*k], -dyi);
                }
            }
            let dx: Vec<CMat> = (0..nb)
                .map(|k| {
                    let mut t = zinv[k].scale(sigma_mu).sub(&x[k]).sub(&x[k].matmul(&dz[k]).matmul(&zinv[k]));
                    if let Some(c) = corr {
                        t = t.sub(&c[k]);
                    }
                    t.hermitian_part()
                })
                .collect();
            Some((dx, dy, dz))
        };
        let steps = |dx: &[CMat], dz: &[CMat]| -> (f64, f64) {
            let mut ap: f64 = 1.0;
            let mut ad: f64 = 1.0;
            let cap = 1.0 / STEP_FRACTION;
            for k in 0..nb {
                ap = ap.min(STEP_FRACTION * max_step(&x[k], &lx[k], &dx[k], cap));
                ad = ad.min(STEP_FRACTION * max_step(&z[k], &lz[k], &dz[k], cap));
            }
            (ap, ad)
        };

        let Some((dxp, _, dzp)) = direction(0.0, None) else {
            return finish(p, x, y, z, SdpStatus::MaxIter, it, pinf, dinf);
        };
        let (ap, ad) = steps(&dxp, &dzp);
        let xz_aff: f64 = (0..nb).map(|k| x[k].add(&dxp[k].scale(ap)).inner(&z[k].add(&dzp[k].scale(ad)))).sum();
        let sigma = (xz_aff / xz).clamp(0.0, 1.0).powi(3);
        let corr: Vec<CMat> = (0..nb).map(|k| dxp[k].matmul(&dzp[k]).matmul(&zinv[k])).collect();
        let Some((dx, dy, dz)) = direction(sigma * mu, Some(&corr)) else {
            return finish(p, x, y, z, SdpStatus::MaxIter, it, pinf, dinf);
        };
        let (ap, ad) = steps(&dx, &dz);
        for k in 0..nb {
            x[k] = x[k].add(&dx[k].scale(ap)).hermitian_part();
            z[k] = z[k].add(&dz[k].scale(ad)).hermitian_part();
        }
        for i in 0..m {
            y[i] += ad * dy[i];
        }
        iterations = it + 1;
    }
    if status == SdpStatus::MaxIter && pinf > 1e-6 && iterations >= settings.max_iter.saturating_sub(1) {
        status = SdpStatus::Infeasible;
    }
    finish(p, x, y, z, status, iterations, pinf, dinf)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    p: &SdpProblem,
    x: Vec<CMat>,
    y: Vec<f64>,
    z: Vec<CMat>,
    status: SdpStatus,
    iterations: usize,
    pinf: f64,
    dinf: f64,
) -> Result<SdpSolution> {
    let primal = p.objective(&x);
    let dual = p.constraints.iter().zip(&y).map(|(c, yi)| c.b * yi).sum();
    Ok(SdpSolution { x, y, z, primal, dual, status, iterations, primal_infeasibility: pinf, dual_infeasibility: dinf })
}

/// Reference first-order solver: alternating-direction augmented Lagrangian
/// on the dual, with PSD projections by eigendecomposition. Slow but
/// independent of the interior-point code path.
pub fn solve_admm(p: &SdpProblem, penalty: f64, max_iter: usize, tol: f64) -> Result<(Vec<CMat>, Vec<f64>, f64)> {
    p.validate()?;
    let nb = p.dims.len();
    let m = p.constraints.len();
    let b: Vec<f64> = p.constraints.iter().map(|c| c.b).collect();
    let dense: Vec<Vec<(usize, CMat)>> = p
        .constraints
        .iter()
        .map(|c| c.terms.iter().map(|(k, op)| (*k, op.to_dense(p.dims[*k]))).collect())
        .collect();
    let mut aat = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            let mut s = 0.0;
            for (ki, ai) in &dense[i] {
                for (kj, aj) in &dense[j] {
                    if ki == kj {
                        s += ai.inner(aj);
                    }
                }
            }
            aat[i * m + j] = s;
        }
    }
    let apply = |x: &[CMat]| -> Vec<f64> { dense.iter().map(|ts| ts.iter().map(|(k, a)| a.inner(&x[*k])).sum()).collect() };
    let adjoint = |v: &[f64]| -> Vec<CMat> {
        let mut out: Vec<CMat> = p.dims.iter().map(|&n| CMat::zeros(n, n)).collect();
        for (i, ts) in dense.iter().enumerate() {
            for (k, a) in ts {
                out[*k].axpy(v[i], a);
            }
        }
        out
    };
    let mut x: Vec<CMat> = p.dims.iter().map(|&n| CMat::zeros(n, n)).collect();
    let mut s: Vec<CMat> = p.dims.iter().map(|&n| CMat::zeros(n, n)).collect();
    let mut y = vec![0.0; m];
    let mu = penalty;
    for _ in 0..max_iter {
        // y = (AA*)⁻¹ [ A(C − S) − μ(A(X) − b) ]
        let cs: Vec<CMat> = (0..nb).map(|k| p.c[k].sub(&s[k])).collect();
        let acs = apply(&cs);
        let ax = apply(&x);
        let rhs: Vec<f64> = (0..m).map(|i| acs[i] - mu * (ax[i] - b[i])).collect();
        y = solve_real_spd(&aat, m, &rhs).ok_or(Error::Construction("singular constraint Gram matrix".into()))?;
        let aty = adjoint(&y);
        let mut change = 0.0;
        for k in 0..nb {
            let v = p.c[k].sub(&aty[k]).sub(&x[k].scale(mu));
            let e = eigh(&v);
            let s_new = e.apply(|l| l.max(0.0));
            let x_new = s_new.sub(&v).scale(1.0 / mu);
            change = f64::max(change, x_new.sub(&x[k]).norm_fro());
            x[k] = x_new;
            s[k] = s_new;
        }
        let res = apply(&x);
        let pinf = norm2(&(0..m).map(|i| res[i] - b[i]).collect::<Vec<_>>());
        if change < tol && pinf < tol {
            break;
        }
    }
    let obj = p.objective(&x);
    Ok((x, y, obj))
}

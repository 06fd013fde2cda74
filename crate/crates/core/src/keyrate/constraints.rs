//! Feasible set for ρ̄ (Alice's register ⊗ truncated mode) and its mapping
//! onto the block SDP.
//!
//! Block layout when w > 0: ρ̄ (4d), P, N, S₁, S₂ (4×4 each) and a diagonal
//! block of scalar slacks. S₁ = P − (Tr_B ρ̄ − ρ_A) and
//! S₂ = N + (Tr_B ρ̄ − ρ_A) turn the two operator inequalities into
//! equalities. With w = 0 only ρ̄ and the moment slacks remain.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyrate::fock::{build_rho_a, coherent_overlap, coherent_vector, displaced_number, displaced_number_sq};
use crate::keyrate::sdp::{self, Constraint, Op, SdpProblem, SdpSettings, SdpSolution};
use crate::linalg::{eigvalsh, CMat, C64};
use crate::simulator::ConstellationSpec;
use crate::statproc::{norm_n, norm_n_sq, MomentEstimates, N_OBSERVABLES};

/// Everything besides the moment data that fixes the feasible set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintParams {
    pub n_c: usize,
    /// Detection limit on |γ|; sets ‖X‖_∞ in the w-correction.
    pub m: f64,
    pub w: f64,
    pub t_f: f64,
    /// Measured centers are divided by √η_D to refer them to Bob's input.
    pub eta_d: f64,
}

/// p_j·lo ≤ Tr[(|j⟩⟨j| ⊗ X)ρ̄] ≤ p_j·hi, bounds already scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentConstraint {
    pub point: usize,
    pub op: CMat,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone)]
pub struct KeyRateProblem {
    pub n_c: usize,
    pub w: f64,
    pub rho_a: CMat,
    pub moments: Vec<MomentConstraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    /// ‖Tr_B ρ̄ − ρ_A‖₁ − 2√w (≤ 0 when satisfied).
    pub partial_trace_excess: f64,
    /// Largest violation of a moment interval.
    pub moment_violation: f64,
    /// Distance of Tr ρ̄ outside [1−w, 1].
    pub trace_violation: f64,
    pub min_eigenvalue: f64,
}

impl Feasibility {
    pub fn violation(&self) -> f64 {
        self.partial_trace_excess.max(self.moment_violation).max(self.trace_violation).max(-self.min_eigenvalue).max(0.0)
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.violation() <= tol
    }
}

/// Hermitian basis of 4×4 matrices, orthogonal under Re Tr(AB).
fn hermitian_basis(n: usize) -> Vec<Vec<(usize, usize, C64)>> {
    let one = C64::new(1.0, 0.0);
    let half = C64::new(0.5, 0.0);
    let ihalf = C64::new(0.0, 0.5);
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        out.push(vec![(a, a, one)]);
        for b in a + 1..n {
            out.push(vec![(a, b, half), (b, a, half)]);
            out.push(vec![(b, a, ihalf), (a, b, -ihalf)]);
        }
    }
    out
}

fn entries_inner(entries: &[(usize, usize, C64)], m: &CMat) -> f64 {
    entries.iter().map(|&(r, c, v)| (v * m[(c, r)]).re).sum()
}

/// Assembles the feasible set from trusted moments and acceptance widths
/// μ_X (observable order n̂_{β_0}, n̂²_{β_0}, n̂_{β_1}, …). An infinite μ_X
/// drops that observable.
pub fn build_constraints(
    moments: &MomentEstimates,
    mus: &[f64; N_OBSERVABLES],
    params: &ConstraintParams,
    spec: &ConstellationSpec,
) -> Result<KeyRateProblem> {
    spec.validate()?;
    let ConstraintParams { n_c, m, w, t_f, eta_d } = *params;
    if n_c < 1 {
        return Err(Error::Construction("n_c must be ≥ 1".into()));
    }
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::Construction("w must lie in [0, 1]".into()));
    }
    if !(eta_d > 0.0 && eta_d <= 1.0) || !(m > 0.0) || !(t_f >= 0.0) {
        return Err(Error::Construction("η_D, M, t_F out of range".into()));
    }
    if mus.iter().any(|&mu| mu.is_nan() || mu < 0.0) {
        return Err(Error::Construction("μ_X must be ≥ 0".into()));
    }
    let values = moments.observables();
    let scale = libm::sqrt(eta_d);
    let mut cons = Vec::new();
    for j in 0..4 {
        let beta = moments.centers[j] / scale;
        let p = spec.probabilities[j];
        for (k, (op, norm)) in [(displaced_number(beta, n_c), norm_n(m)), (displaced_number_sq(beta, n_c), norm_n_sq(m))]
            .into_iter()
            .enumerate()
        {
            let idx = 2 * j + k;
            let mu = mus[idx];
            if !mu.is_finite() {
                continue;
            }
            let x = values[idx];
            let slack = (1.0 + t_f) * mu;
            cons.push(MomentConstraint { point: j, op, lo: p * (x - slack - w * norm), hi: p * (x + slack) });
        }
    }
    Ok(KeyRateProblem { n_c, w, rho_a: build_rho_a(spec), moments: cons })
}

impl KeyRateProblem {
    pub fn d(&self) -> usize {
        self.n_c + 1
    }

    pub fn dim(&self) -> usize {
        4 * self.d()
    }

    /// SDP for min Tr[C ρ̄] over the feasible set; ρ̄ is block 0.
    pub fn sdp(&self, cost: &CMat) -> Result<SdpProblem> {
        if cost.dim() != self.dim() {
            return Err(Error::Length { expected: self.dim(), got: cost.dim() });
        }
        let d = self.d();
        let w = self.w;
        let sw = 2.0 * libm::sqrt(w);
        let one = C64::new(1.0, 0.0);
        let e = |i: usize, v: f64| Op::Sparse(vec![(i, i, C64::new(v, 0.0))]);
        let trace_op = |n: usize| Op::Sparse((0..n).map(|i| (i, i, one)).collect());
        let basis = hermitian_basis(4);
        let mut constraints = Vec::new();

        // Diagonal slack block layout.
        let (pt_blocks, lp) = if w > 0.0 { (true, 5) } else { (false, 1) };
        let s_norm = 0;
        let s_mom = if pt_blocks { 1 } else { 0 };
        let n_ineq = self.moments.iter().filter(|mc| mc.hi > mc.lo).count();
        let s_tr = s_mom + 2 * n_ineq;
        let n_lp = s_tr + if pt_blocks { 2 } else { 0 };

        for h in &basis {
            let kron = Op::Kron { d, entries: h.clone(), x: None };
            let b = entries_inner(h, &self.rho_a);
            if pt_blocks {
                let mut neg = h.clone();
                for t in &mut neg {
                    t.2 = -t.2;
                }
                constraints.push(Constraint {
                    terms: vec![(0, kron), (1, Op::Sparse(neg.clone())), (3, Op::Sparse(h.clone()))],
                    b,
                });
                constraints.push(Constraint {
                    terms: vec![
                        (3, Op::Sparse(h.clone())),
                        (4, Op::Sparse(h.clone())),
                        (1, Op::Sparse(neg.clone())),
                        (2, Op::Sparse(neg)),
                    ],
                    b: 0.0,
                });
            } else {
                constraints.push(Constraint { terms: vec![(0, kron)], b });
            }
        }
        if pt_blocks {
            constraints.push(Constraint {
                terms: vec![(1, trace_op(4)), (2, trace_op(4)), (lp, e(s_norm, 1.0))],
                b: sw,
            });
        }
        let mut lo_slack = s_mom;
        for mc in &self.moments {
            let op = Op::Kron { d, entries: vec![(mc.point, mc.point, one)], x: Some(mc.op.clone()) };
            if mc.hi <= mc.lo {
                constraints.push(Constraint { terms: vec![(0, op)], b: 0.5 * (mc.lo + mc.hi) });
                continue;
            }
            constraints.push(Constraint { terms: vec![(0, op), (lp, e(lo_slack, -1.0))], b: mc.lo });
            constraints.push(Constraint {
                terms: vec![(lp, e(lo_slack, 1.0)), (lp, e(lo_slack + 1, 1.0))],
                b: mc.hi - mc.lo,
            });
            lo_slack += 2;
        }
        if pt_blocks {
            let tr_rho = Op::Kron { d, entries: (0..4).map(|a| (a, a, one)).collect(), x: None };
            constraints.push(Constraint { terms: vec![(0, tr_rho), (lp, e(s_tr, -1.0))], b: 1.0 - w });
            constraints.push(Constraint { terms: vec![(lp, e(s_tr, 1.0)), (lp, e(s_tr + 1, 1.0))], b: w });
        }

        let mom_width: f64 = self.moments.iter().map(|mc| (mc.hi - mc.lo).max(0.0)).sum();
        let (dims, trace_bounds) = if pt_blocks {
            (vec![4 * d, 4, 4, 4, 4, n_lp], vec![1.0, sw, sw, sw + w, sw, sw + mom_width + w])
        } else {
            (vec![4 * d, n_lp], vec![1.0, mom_width])
        };
        let (dims, trace_bounds) = if n_lp == 0 { (vec![4 * d], vec![1.0]) } else { (dims, trace_bounds) };
        let mut c: Vec<CMat> = dims.iter().map(|&n| CMat::zeros(n, n)).collect();
        c[0] = cost.hermitian_part();
        let p = SdpProblem { dims, c, constraints, trace_bounds };
        p.validate()?;
        Ok(p)
    }

    pub fn solve_linear(&self, cost: &CMat, settings: &SdpSettings) -> Result<SdpSolution> {
        sdp::solve(&self.sdp(cost)?, settings)
    }

    /// A well-centered strictly feasible ρ̄ (analytic center of the set).
    pub fn central_point(&self) -> Result<CMat> {
        let zero = CMat::zeros(self.dim(), self.dim());
        let s = self.solve_linear(&zero, &SdpSettings { tol: 1e-10, max_iter: 100, stop_mu: Some(1e-4) })?;
        if s.primal_infeasibility > 1e-8 {
            return Err(Error::Infeasible("constraint set is empty"));
        }
        Ok(s.x[0].clone())
    }

    pub fn feasibility(&self, rho: &CMat) -> Result<Feasibility> {
        if rho.dim() != self.dim() {
            return Err(Error::Length { expected: self.dim(), got: rho.dim() });
        }
        let d = self.d();
        let diff = rho.partial_trace_b(d).sub(&self.rho_a);
        let tn: f64 = eigvalsh(&diff.hermitian_part()).iter().map(|l| l.abs()).sum();
        let mut mv: f64 = 0.0;
        for mc in &self.moments {
            let blk = rho.sub_matrix(mc.point * d, mc.point * d, d, d);
            let v = mc.op.inner(&blk);
            mv = mv.max(mc.lo - v).max(v - mc.hi);
        }
        let tr = rho.trace().re;
        let tv = (1.0 - self.w - tr).max(tr - 1.0).max(0.0);
        Ok(Feasibility {
            partial_trace_excess: tn - 2.0 * libm::sqrt(self.w),
            moment_violation: mv,
            trace_violation: tv,
            min_eigenvalue: eigvalsh(&rho.hermitian_part())[0],
        })
    }
}

/// ρ̄ of the source-replacement state sent through a phase-insensitive
/// Gaussian channel: loss η followed by Gaussian random displacements adding
/// `n_ex` photons, truncated to n ≤ n_c. Coherent input |α⟩ leaves as a
/// thermal state of mean `n_ex` centered on √η·α.
pub fn thermal_loss_state(spec: &ConstellationSpec, eta: f64, n_ex: f64, n_c: usize) -> Result<CMat> {
    spec.validate()?;
    if !(0.0..=1.0).contains(&eta) || !(n_ex >= 0.0) {
        return Err(Error::Domain("η ∈ [0,1] and n_ex ≥ 0 required"));
    }
    let d = n_c + 1;
    let a = &spec.amplitudes;
    let p = &spec.probabilities;
    let se = libm::sqrt(eta);
    let sl = libm::sqrt(1.0 - eta);
    // 2-D Gauss–Hermite nodes for ζ with E|ζ|² = n_ex.
    let (nodes, weights) = gauss_hermite(if n_ex > 0.0 { 24 } else { 1 });
    let sigma = libm::sqrt(n_ex / 2.0);
    let mut rho = CMat::zeros(4 * d, 4 * d);
    for (ix, &x) in nodes.iter().enumerate() {
        for (iy, &y) in nodes.iter().enumerate() {
            let wgt = weights[ix] * weights[iy];
            let zeta = C64::new(core::f64::consts::SQRT_2 * sigma * x, core::f64::consts::SQRT_2 * sigma * y);
            let vecs: Vec<Vec<C64>> = (0..4).map(|i| coherent_vector(zeta + a[i] * se, d)).collect();
            for i in 0..4 {
                for j in 0..4 {
                    // Eve's loss-mode overlap and the displacement phases.
                    let env = coherent_overlap(a[j] * sl, a[i] * sl);
                    let bi = a[i] * se;
                    let bj = a[j] * se;
                    let phase = C64::new(0.0, (zeta * bi.conj()).im - (zeta * bj.conj()).im).exp();
                    let c = env * phase * libm::sqrt(p[i] * p[j]) * wgt;
                    for r in 0..d {
                        let vr = vecs[i][r] * c;
                        for s in 0..d {
                            rho[(i * d + r, j * d + s)] += vr * vecs[j][s].conj();
                        }
                    }
                }
            }
        }
    }
    Ok(rho.hermitian_part())
}

/// Nodes and weights for ∫ f(x) e^{−x²} dx / √π (Golub–Welsch).
fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![1.0]);
    }
    let mut j = CMat::zeros(n, n);
    for k in 1..n {
        let b = libm::sqrt(k as f64 / 2.0);
        j[(k - 1, k)] = C64::new(b, 0.0);
        j[(k, k - 1)] = C64::new(b, 0.0);
    }
    let e = crate::linalg::eigh(&j);
    let w = (0..n).map(|k| e.vectors[(0, k)].norm_sqr()).collect();
    (e.values, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{prepare, transmit_measure, ChannelModel};
    use crate::statproc::{acceptance_mu, displaced_moments, trusted_moments};

    fn spec() -> ConstellationSpec {
        ConstellationSpec::qpsk(0.71)
    }

    fn exact_moments(eta: f64, n_ex: f64, eta_d: f64) -> MomentEstimates {
        let s = spec();
        let n_sq = n_ex + 2.0 * n_ex * n_ex;
        MomentEstimates {
            n_nsy: [n_ex; 4],
            n_sq_nsy: [n_sq; 4],
            n_tr: [n_ex; 4],
            n_sq_tr: [n_sq; 4],
            n_nsy_se: [0.0; 4],
            counts: [1; 4],
            centers: core::array::from_fn(|j| s.amplitudes[j] * libm::sqrt(eta * eta_d)),
        }
    }

    fn params(n_c: usize, w: f64) -> ConstraintParams {
        ConstraintParams { n_c, m: 5.5, w, t_f: 1.0, eta_d: 0.6858 }
    }

    #[test]
    fn gauss_hermite_moments() {
        let (x, w) = gauss_hermite(24);
        let m = |k: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-13);
        assert!((m(2) - 0.5).abs() < 1e-13);
        assert!((m(4) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn thermal_loss_state_statistics() {
        let s = spec();
        let (eta, n_ex, n_c) = (0.3, 0.01, 10);
        let rho = thermal_loss_state(&s, eta, n_ex, n_c).unwrap();
        let d = n_c + 1;
        assert!((rho.trace().re - 1.0).abs() < 1e-10);
        assert!(eigvalsh(&rho)[0] > -1e-12);
        // Alice's marginal is untouched by the channel.
        assert!(rho.partial_trace_b(d).sub(&build_rho_a(&s)).max_abs() < 1e-10);
        for j in 0..4 {
            let blk = rho.sub_matrix(j * d, j * d, d, d).scale(4.0);
            let beta = s.amplitudes[j] * libm::sqrt(eta);
            let n1 = displaced_number(beta, n_c).inner(&blk);
            let n2 = displaced_number_sq(beta, n_c).inner(&blk);
            assert!((n1 - n_ex).abs() < 1e-10, "{n1}");
            assert!((n2 - n_ex - 2.0 * n_ex * n_ex).abs() < 1e-9, "{n2}");
        }
    }

    #[test]
    fn honest_state_is_feasible_for_exact_moments() {
        let (eta, xi, eta_d) = (0.2764, 0.0074, 0.6858);
        let n_ex = eta * xi / 2.0;
        let est = exact_moments(eta, n_ex, eta_d);
        let mus = [0.0; N_OBSERVABLES];
        let kp = build_constraints(&est, &mus, &params(10, 1e-7), &spec()).unwrap();
        let rho = thermal_loss_state(&spec(), eta, n_ex, 10).unwrap();
        let f = kp.feasibility(&rho).unwrap();
        assert!(f.holds(1e-9), "{f:?}");
    }

    #[test]
    fn honest_state_is_feasible_for_simulated_moments() {
        let (eta, xi, eta_d, nu) = (0.2764, 0.0074, 0.6858, 0.0193);
        let s = spec();
        let model = ChannelModel { eta_ch: eta, xi, eta_d, nu_el: nu };
        let labels = prepare(2_000_000, &s, 16).unwrap();
        let frame = transmit_measure(&labels, &s, &model, 17).unwrap();
        let est = trusted_moments(&displaced_moments(&frame).unwrap(), eta_d, nu).unwrap();
        // Widths from an injected full-scale test count.
        let k_t = 920_000_000u64;
        let mus: [f64; N_OBSERVABLES] = core::array::from_fn(|i| {
            let norm = if i % 2 == 0 { norm_n(5.5) } else { norm_n_sq(5.5) };
            acceptance_mu(norm, k_t, 1e-11, true).unwrap()
        });
        let p = params(12, 1e-7);
        let kp = build_constraints(&est, &mus, &p, &s).unwrap();
        let n_ex = eta * xi / 2.0;
        let rho = thermal_loss_state(&s, eta, n_ex, 12).unwrap();
        let f = kp.feasibility(&rho).unwrap();
        assert!(f.holds(1e-9), "{f:?}");
    }

    #[test]
    fn zero_weight_collapses_partial_trace() {
        let est = exact_moments(0.3, 0.002, 1.0);
        let mus = [0.01; N_OBSERVABLES];
        let kp = build_constraints(&est, &mus, &params(6, 0.0), &spec()).unwrap();
        let sdp = kp.sdp(&CMat::zeros(kp.dim(), kp.dim())).unwrap();
        assert_eq!(sdp.dims.len(), 2);
        let rho = kp.central_point().unwrap();
        assert!(rho.partial_trace_b(7).sub(&kp.rho_a).max_abs() < 1e-8);
        assert!((rho.trace().re - 1.0).abs() < 1e-8);
    }

    #[test]
    fn infinite_mu_drops_moments() {
        let est = exact_moments(0.3, 0.002, 1.0);
        let kp = build_constraints(&est, &[f64::INFINITY; N_OBSERVABLES], &params(6, 1e-4), &spec()).unwrap();
        assert!(kp.moments.is_empty());
        // Feasible set is the partial-trace set: any state with Alice's
        // marginal close to ρ_A qualifies, e.g. ρ_A ⊗ |5⟩⟨5|.
        let mut f5 = CMat::zeros(7, 7);
        f5[(5, 5)] = C64::new(1.0, 0.0);
        let rho = kp.rho_a.kron(&f5);
        assert!(kp.feasibility(&rho).unwrap().holds(1e-12));
    }

    #[test]
    fn central_point_is_interior() {
        let est = exact_moments(0.2764, 0.001, 0.6858);
        let mus = [0.01; N_OBSERVABLES];
        let kp = build_constraints(&est, &mus, &params(8, 1e-6), &spec()).unwrap();
        let rho = kp.central_point().unwrap();
        let f = kp.feasibility(&rho).unwrap();
        assert!(f.holds(1e-8), "{f:?}");
        assert!(f.min_eigenvalue > 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let est = exact_moments(0.3, 0.0, 1.0);
        assert!(build_constraints(&est, &[0.0; 8], &params(0, 0.0), &spec()).is_err());
        assert!(build_constraints(&est, &[-1.0; 8], &params(4, 0.0), &spec()).is_err());
        let kp = build_constraints(&est, &[0.0; 8], &params(4, 0.0), &spec()).unwrap();
        assert!(kp.sdp(&CMat::zeros(3, 3)).is_err());
    }
}

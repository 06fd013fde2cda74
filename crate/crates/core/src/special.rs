//! Special functions: log-gamma, regularized incomplete gamma, binary entropy
//! and divergence, Gaussian tail, Laguerre polynomials and Gauss–Legendre
//! nodes.

use core::f64::consts::{LN_2, SQRT_2};

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn ln_factorial(n: usize) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// Regularized incomplete gamma pair `(P(a, x), Q(a, x))`.
///
/// Whichever of the two is computed directly (series below `a + 1`,
/// continued fraction above) keeps full relative accuracy; the other is its
/// complement.
pub fn gamma_pq(a: f64, x: f64) -> (f64, f64) {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x.is_infinite() {
        return (1.0, 0.0);
    }
    let log_pre = a * libm::log(x) - x - ln_gamma(a);
    if x < a + 1.0 {
        let p = lower_series(a, x, log_pre);
        (p, 1.0 - p)
    } else {
        let q = upper_fraction(a, x, log_pre);
        (1.0 - q, q)
    }
}

pub fn gamma_p(a: f64, x: f64) -> f64 {
    gamma_pq(a, x).0
}

pub fn gamma_q(a: f64, x: f64) -> f64 {
    gamma_pq(a, x).1
}

/// Upper incomplete gamma Γ(a, x) (not regularized).
pub fn upper_gamma(a: f64, x: f64) -> f64 {
    gamma_q(a, x) * libm::exp(ln_gamma(a))
}

fn lower_series(a: f64, x: f64, log_pre: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * libm::exp(log_pre)
}

// Modified Lentz evaluation of the continued fraction for Q.
fn upper_fraction(a: f64, x: f64, log_pre: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    libm::exp(log_pre) * h
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -(p * libm::log2(p) + (1.0 - p) * libm::log2(1.0 - p))
}

/// D((1−p, p) ‖ (1−q, q)) in bits. Infinite when `q ∈ {0, 1}` does not cover `p`.
pub fn kl_binary(p: f64, q: f64) -> f64 {
    let mut d = 0.0;
    if p > 0.0 {
        if q <= 0.0 {
            return f64::INFINITY;
        }
        d += p * (libm::log(p) - libm::log(q));
    }
    if p < 1.0 {
        if q >= 1.0 {
            return f64::INFINITY;
        }
        d += (1.0 - p) * (libm::log1p(-p) - libm::log1p(-q));
    }
    d / LN_2
}

/// Standard Gaussian upper tail Q(x) = P[Z > x].
pub fn gaussian_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Generalized Laguerre polynomial L_n^{(α)}(x) by the three-term recurrence.
pub fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 1.0 + alpha - x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (alloc::vec::Vec<f64>, alloc::vec::Vec<f64>) {
    let mut x = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn incomplete_gamma_integer_closed_form() {
        // Q(n, x) = e^{-x} Σ_{k<n} x^k / k!
        for &(n, x) in &[(1usize, 0.3), (3, 2.0), (21, 5.5), (13, 30.0), (5, 0.01)] {
            let mut s = 0.0;
            let mut t = 1.0;
            for k in 0..n {
                if k > 0 {
                    t *= x / k as f64;
                }
                s += t;
            }
            let q = s * (-x).exp();
            assert_relative_eq!(gamma_q(n as f64, x), q, max_relative = 1e-13);
            assert_relative_eq!(gamma_p(n as f64, x) + gamma_q(n as f64, x), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn incomplete_gamma_half_integer() {
        // P(1/2, x) = erf(√x)
        for &x in &[0.04f64, 0.5, 1.7, 9.0, 40.0] {
            assert_relative_eq!(gamma_p(0.5, x), libm::erf(x.sqrt()), max_relative = 1e-13);
        }
        // P(3/2, x) = erf(√x) − 2√(x/π) e^{-x}
        for &x in &[0.2f64, 2.5, 12.0] {
            let want = libm::erf(x.sqrt()) - 2.0 * (x / core::f64::consts::PI).sqrt() * (-x).exp();
            assert_relative_eq!(gamma_p(1.5, x), want, max_relative = 1e-12);
        }
    }

    #[test]
    fn energy_test_ratio_reference() {
        // mpmath: gammainc(21, 5.5, inf) / gamma(21)
        assert_relative_eq!(gamma_q(21.0, 5.5), 0.999_999_625_354_421_5, max_relative = 1e-12);
    }

    #[test]
    fn entropy_and_divergence() {
        assert_eq!(binary_entropy(0.5), 1.0);
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(kl_binary(0.3, 0.3), 0.0);
        assert_relative_eq!(kl_binary(0.0, 0.01), -(0.99f64).log2(), max_relative = 1e-14);
        assert_eq!(kl_binary(0.1, 0.0), f64::INFINITY);
        assert_relative_eq!(gaussian_tail(0.0), 0.5);
        assert_relative_eq!(gaussian_tail(1.0), 0.158_655_253_931_457_05, max_relative = 1e-14);
    }

    #[test]
    fn laguerre_closed_forms() {
        // L_2^{(α)}(x) = x²/2 − (α+2)x + (α+2)(α+1)/2
        for &(a, x) in &[(0.0, 0.7), (3.0, 2.5), (7.0, 40.0)] {
            let want = x * x / 2.0 - (a + 2.0) * x + (a + 2.0) * (a + 1.0) / 2.0;
            assert_relative_eq!(laguerre(2, a, x), want, max_relative = 1e-13);
        }
        assert_eq!(laguerre(0, 4.0, 9.0), 1.0);
        assert_relative_eq!(laguerre(1, 4.0, 9.0), -4.0);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1usize, 2, 5, 16, 31] {
            let (x, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
            // exact up to degree 2n − 1
            let deg = 2 * n - 2;
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert_relative_eq!(got, 2.0 / (deg as f64 + 1.0), max_relative = 1e-13);
        }
    }
}

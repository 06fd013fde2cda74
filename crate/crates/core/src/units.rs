use core::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One heterodyne outcome in natural units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NuSample {
    pub q: f64,
    pub p: f64,
}

impl NuSample {
    pub fn new(q: f64, p: f64) -> Result<Self> {
        if !(q.is_finite() && p.is_finite()) {
            return Err(Error::InvalidSample("non-finite quadrature"));
        }
        Ok(Self { q, p })
    }

    /// y = q + i·p
    pub fn y(self) -> Complex64 {
        Complex64::new(self.q, self.p)
    }

    /// Coherent amplitude estimate γ = (q + i·p)/√2.
    pub fn gamma(self) -> Complex64 {
        Complex64::new(self.q * FRAC_1_SQRT_2, self.p * FRAC_1_SQRT_2)
    }
}

pub fn snu_to_nu(q_snu: f64, p_snu: f64) -> Result<NuSample> {
    NuSample::new(q_snu * FRAC_1_SQRT_2, p_snu * FRAC_1_SQRT_2)
}

pub fn alpha_from_means(mean_q: f64, mean_p: f64) -> Result<Complex64> {
    if !(mean_q.is_finite() && mean_p.is_finite()) {
        return Err(Error::InvalidSample("non-finite mean"));
    }
    Ok(Complex64::new(mean_q, mean_p) * FRAC_1_SQRT_2)
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(snu_to_nu(0.0, 0.0).unwrap(), NuSample { q: 0.0, p: 0.0 });
        let s = snu_to_nu(2f64.sqrt(), -(2f64.sqrt())).unwrap();
        assert_abs_diff_eq!(s.q, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.p, -1.0, epsilon = 1e-15);
        let s = snu_to_nu(1.4142135, 2.8284271).unwrap();
        assert_abs_diff_eq!(s.q, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(s.p, 2.0, epsilon = 1e-6);
        assert!(snu_to_nu(f64::NAN, 0.0).is_err());

        assert_eq!(alpha_from_means(0.0, 0.0).unwrap(), Complex64::new(0.0, 0.0));
        assert_abs_diff_eq!(alpha_from_means(2f64.sqrt(), 0.0).unwrap().re, 1.0, epsilon = 1e-15);
        let a = alpha_from_means(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(a.re, 0.70711, epsilon = 1e-5);
        assert_abs_diff_eq!(a.im, 0.70711, epsilon = 1e-5);
        assert!(alpha_from_means(f64::INFINITY, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn snu_round_trip(q in -1e6f64..1e6, p in -1e6f64..1e6) {
            let s = snu_to_nu(q * 2f64.sqrt(), p * 2f64.sqrt()).unwrap();
            prop_assert!((s.q - q).abs() <= 1e-15 * (1.0 + q.abs()) * 4.0);
            prop_assert!((s.p - p).abs() <= 1e-15 * (1.0 + p.abs()) * 4.0);
        }
    }
}

//! Binary symmetric channel seen by one Gray bit of a kept QPSK symbol.

use crate::special::{binary_entropy, gaussian_tail};

/// Sign-detection error per quadrature, p = Q(√SNR).
pub fn crossover_from_snr(snr: f64) -> f64 {
    if snr <= 0.0 {
        return 0.5;
    }
    gaussian_tail(libm::sqrt(snr))
}

/// Inverse of [`crossover_from_snr`] by bisection on Q⁻¹(p).
pub fn snr_from_crossover(p: f64) -> f64 {
    if p >= 0.5 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gaussian_tail(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    x * x
}

/// Channel LLR magnitude ln((1−p)/p).
pub fn llr_magnitude(p: f64) -> f64 {
    let p = p.clamp(1e-12, 0.5);
    libm::log((1.0 - p) / p)
}

/// LLRs for a hard-decision block: +L for bit 0, −L for bit 1.
pub fn bsc_llrs(bits: &[u8], p: f64) -> alloc::vec::Vec<f64> {
    let l = llr_magnitude(p);
    bits.iter().map(|&b| if b & 1 == 0 { l } else { -l }).collect()
}

/// Per-bit mutual information 1 − h(p).
pub fn bsc_capacity(p: f64) -> f64 {
    1.0 - binary_entropy(p)
}

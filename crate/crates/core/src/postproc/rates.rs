//! Code-rate selection from the measured SNR.

/// (rate, SNR at the density-evolution threshold) for the shipped degree
/// profile at each rate offered to the pipeline; every rate makes 32'000·R
/// integral. Regenerate with `cargo run --release --example design_table`.
pub const DESIGN_TABLE: [(f64, f64); 39] = [
    (0.010, 0.074457),
    (0.015, 0.080429),
    (0.020, 0.090601),
    (0.025, 0.100722),
    (0.030, 0.105427),
    (0.035, 0.121163),
    (0.040, 0.130523),
    (0.045, 0.139235),
    (0.050, 0.152555),
    (0.055, 0.174979),
    (0.060, 0.195108),
    (0.065, 0.203787),
    (0.070, 0.236280),
    (0.075, 0.252426),
    (0.080, 0.253910),
    (0.085, 0.279631),
    (0.090, 0.323446),
    (0.095, 0.316340),
    (0.100, 0.343799),
    (0.120, 0.443306),
    (0.140, 0.510417),
    (0.160, 0.604785),
    (0.180, 0.723438),
    (0.200, 0.811696),
    (0.220, 0.892290),
    (0.240, 0.969107),
    (0.260, 1.027763),
    (0.280, 1.105560),
    (0.300, 1.317366),
    (0.320, 1.343097),
    (0.340, 1.484211),
    (0.360, 1.602981),
    (0.380, 1.757173),
    (0.400, 1.823287),
    (0.420, 1.981563),
    (0.440, 2.002606),
    (0.460, 2.227080),
    (0.480, 2.307942),
    (0.500, 2.496925),
];

/// Largest design rate whose threshold, times `backoff`, the measured SNR
/// clears.
pub fn select_rate(snr: f64, backoff: f64) -> Option<f64> {
    DESIGN_TABLE.iter().filter(|&&(_, s)| s * backoff <= snr).map(|&(r, _)| r).reduce(f64::max)
}

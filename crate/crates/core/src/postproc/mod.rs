//! Classical post-processing: LDPC reverse reconciliation, leakage
//! accounting, error verification and privacy amplification.

pub mod bsc;
pub mod density;
pub mod gf2n;
pub mod hash;
pub mod ldpc;
pub mod leak;
pub mod rates;
pub mod toeplitz;

pub use bsc::{bsc_capacity, bsc_llrs, crossover_from_snr, snr_from_crossover};
pub use hash::{poly_hash_verify, PolyHash};
pub use ldpc::{ldpc_construct, DecodeOutcome, DegreeProfile, LdpcCode};
pub use leak::{avg_beta, ec_leak, ReconciliationReport};
pub use toeplitz::toeplitz_pa;

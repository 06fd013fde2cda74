use dmcv_core::postproc::bsc::{bsc_llrs, crossover_from_snr};
use dmcv_core::postproc::hash::poly_hash_verify;
use dmcv_core::postproc::ldpc::{ldpc_construct, LdpcCode, DESK_BLOCK, MAX_ITER};
use dmcv_core::postproc::rates::DESIGN_TABLE;
use dmcv_core::postproc::toeplitz::toeplitz_pa;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bob's random block and Alice's copy through a BSC(p).
fn pair(n: usize, p: f64, rng: &mut ChaCha8Rng) -> (Vec<u8>, Vec<u8>) {
    let bob: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
    let alice = bob.iter().map(|&b| b ^ u8::from(rng.gen_bool(p))).collect();
    (alice, bob)
}

fn decodes(code: &LdpcCode, alice: &[u8], bob: &[u8], p: f64) -> Option<Vec<u8>> {
    let syn = code.syndrome(bob).unwrap();
    let out = code.bp_decode(&bsc_llrs(alice, p), &syn, MAX_ITER).unwrap();
    out.success.then_some(out.bits)
}

fn rate_005() -> (LdpcCode, f64) {
    let snr = DESIGN_TABLE.iter().find(|e| e.0 == 0.05).unwrap().1;
    (ldpc_construct(0.05, DESK_BLOCK, 1).unwrap(), crossover_from_snr(snr))
}

#[test]
fn decodes_below_threshold_and_fails_far_above() {
    let (code, p_star) = rate_005();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let blocks = 60;
    let mut ok = 0;
    for _ in 0..blocks {
        let (a, b) = pair(code.len(), p_star / 2.0, &mut rng);
        ok += usize::from(decodes(&code, &a, &b, p_star / 2.0).as_deref() == Some(&b[..]));
    }
    assert_eq!(ok, blocks);
    // crossover 0.45 is far beyond what a rate-0.05 code can correct
    let mut fails = 0;
    for _ in 0..8 {
        let (a, b) = pair(code.len(), 0.45, &mut rng);
        fails += usize::from(decodes(&code, &a, &b, 0.45).as_deref() != Some(&b[..]));
    }
    assert_eq!(fails, 8);
}

#[test]
fn decode_verify_and_amplify_agree() {
    let (code, p_star) = rate_005();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut ka, mut kb) = (Vec::new(), Vec::new());
    for k in 0..4u64 {
        let (a, b) = pair(code.len(), 0.8 * p_star, &mut rng);
        let Some(corrected) = decodes(&code, &a, &b, 0.8 * p_star) else { continue };
        let (equal, _) = poly_hash_verify(&corrected, &b, 96, 100 + k).unwrap();
        assert!(equal);
        ka.extend(corrected);
        kb.extend(b);
    }
    assert!(!ka.is_empty());
    let out = ka.len() / 10;
    assert_eq!(toeplitz_pa(&ka, out, 3).unwrap(), toeplitz_pa(&kb, out, 3).unwrap());
    // a single residual error is caught by verification
    let mut wrong = ka[..code.len()].to_vec();
    wrong[17] ^= 1;
    assert!(!poly_hash_verify(&wrong, &kb[..code.len()], 96, 7).unwrap().0);
}

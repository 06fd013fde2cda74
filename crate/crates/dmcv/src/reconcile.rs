//! Blockwise reverse reconciliation with error verification.

use dmcv_core::postproc::bsc::{bsc_capacity, bsc_llrs};
use dmcv_core::postproc::hash::{tag_bytes, PolyHash};
use dmcv_core::postproc::ldpc::LdpcCode;
use dmcv_core::postproc::leak::ReconciliationReport;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::transcript::{syndrome_message, Message, Transcript};

/// SplitMix64 step, used to derive independent per-purpose seeds.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockOutcome {
    pub index: u64,
    pub decoded: bool,
    pub verified: bool,
    pub iterations: usize,
    /// Bit errors between the two raw blocks.
    pub raw_errors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconciled {
    pub report: ReconciliationReport,
    pub blocks: Vec<BlockOutcome>,
    /// Alice's corrected bits over verified blocks.
    pub alice: Vec<u8>,
    /// Bob's bits over the same blocks.
    pub bob: Vec<u8>,
    /// Bits charged to error correction, the n·EC_leak of the key length.
    pub leak_bits: f64,
    pub tags_sent: u64,
    pub unreconciled: u64,
}

pub struct ReconcileInputs<'a> {
    pub alice: &'a [u8],
    pub bob: &'a [u8],
    pub code: &'a LdpcCode,
    /// Crossover estimate for the LLRs.
    pub p: f64,
    pub b_ev: u32,
    pub hash_seed: u64,
    pub max_iter: usize,
    /// Per-bit charge for discarded bits, the capped (QRE − Δ − δ) term.
    pub fail_charge: f64,
    /// Key-generation symbols n, for the per-symbol leak.
    pub n_symbols: u64,
}

/// Bob's blocks are the reference; Alice decodes toward them from his
/// syndromes. Blocks that fail decoding or verification are discarded and
/// charged `fail_charge` per bit, like the tail past the last full block.
pub fn reconcile(inp: &ReconcileInputs<'_>, transcript: &mut Transcript) -> Result<Reconciled> {
    let l = inp.code.len();
    let s = inp.code.syndrome_len();
    let blocks = inp.bob.len() / l;
    let code_id = (l - s) as u32;
    let outcomes: Vec<Result<(BlockOutcome, Vec<u8>, Vec<u8>, Option<u128>)>> = (0..blocks)
        .into_par_iter()
        .map(|k| {
            let (a, b) = (&inp.alice[k * l..(k + 1) * l], &inp.bob[k * l..(k + 1) * l]);
            let syn = inp.code.syndrome(b)?;
            let dec = inp.code.bp_decode(&bsc_llrs(a, inp.p), &syn, inp.max_iter)?;
            let raw_errors = a.iter().zip(b).filter(|(x, y)| x != y).count();
            let mut tag = None;
            let mut verified = false;
            if dec.success {
                let h = PolyHash::from_seed(inp.b_ev, derive_seed(inp.hash_seed, k as u64))?;
                let (ta, tb) = (h.tag(&dec.bits), h.tag(b));
                verified = ta == tb;
                tag = Some(tb);
            }
            let o = BlockOutcome { index: k as u64, decoded: dec.success, verified, iterations: dec.iterations, raw_errors };
            Ok((o, syn, dec.bits, tag))
        })
        .collect();
    let mut out_blocks = Vec::with_capacity(blocks);
    let (mut alice, mut bob) = (Vec::new(), Vec::new());
    let mut tags_sent = 0u64;
    let mut i_ab = Vec::with_capacity(blocks);
    let mut success = Vec::with_capacity(blocks);
    let mut failed_bits = 0u64;
    for r in outcomes {
        let (o, syn, bits, tag) = r?;
        let k = o.index;
        transcript.push(syndrome_message(code_id, k, &syn));
        if let Some(t) = tag {
            tags_sent += 1;
            transcript.push(Message::Verification {
                block: k,
                seed: derive_seed(inp.hash_seed, k),
                tag_bits: inp.b_ev,
                tag: tag_bytes(t, inp.b_ev),
            });
        }
        let p_hat = if o.verified { o.raw_errors as f64 / l as f64 } else { inp.p };
        i_ab.push(bsc_capacity(p_hat));
        success.push(o.verified);
        if o.verified {
            alice.extend_from_slice(&bits);
            bob.extend_from_slice(&inp.bob[k as usize * l..(k as usize + 1) * l]);
        } else {
            transcript.push(Message::BlockFailure { block: k, bits: l as u32 });
            failed_bits += l as u64;
        }
        out_blocks.push(o);
    }
    let unreconciled = (inp.bob.len() - blocks * l) as u64;
    if unreconciled > 0 {
        transcript.push(Message::Unreconciled { bits: unreconciled });
    }
    let verified = success.iter().filter(|&&v| v).count() as f64;
    let leak_bits = verified * s as f64 + (failed_bits + unreconciled) as f64 * inp.fail_charge;
    let per_symbol = if inp.n_symbols == 0 { 0.0 } else { leak_bits / inp.n_symbols as f64 };
    let report = ReconciliationReport::new(&success, i_ab, inp.code.rate(), per_symbol)?;
    Ok(Reconciled { report, blocks: out_blocks, alice, bob, leak_bits, tags_sent, unreconciled })
}

/// Leakage of an ideal code running at efficiency β on the BSC: per bit
/// 1 − β·(1 − h(p)). No blocks are decoded.
pub fn theoretical(kept_bits: usize, block_len: usize, p: f64, beta: f64, n_symbols: u64) -> Result<Reconciled> {
    let blocks = kept_bits / block_len;
    let c = bsc_capacity(p);
    let leak_bits = kept_bits as f64 * (1.0 - beta * c);
    let per_symbol = if n_symbols == 0 { 0.0 } else { leak_bits / n_symbols as f64 };
    let report = ReconciliationReport::new(&vec![true; blocks], vec![c; blocks], beta * c, per_symbol)?;
    Ok(Reconciled { report, blocks: Vec::new(), alice: Vec::new(), bob: Vec::new(), leak_bits, tags_sent: blocks as u64, unreconciled: 0 })
}

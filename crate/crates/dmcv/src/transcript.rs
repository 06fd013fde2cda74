//! Log of every public message, for leakage audits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{pack_bits, Reader};

pub const TRANSCRIPT_MAGIC: &[u8; 8] = b"DMCVTRN1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Message {
    /// Seed of the test-position sampler and the number of test symbols
    /// whose labels and outcomes are then revealed.
    TestSelection { seed: u64, count: u64 },
    /// Bob's ⊥ mask over the key-generation symbols, packed.
    Sifting { symbols: u64, mask: Vec<u8> },
    /// Syndrome of one block.
    Syndrome { code_id: u32, block: u64, bits: u32, syndrome: Vec<u8> },
    /// Decoding or verification failed; the block is discarded.
    BlockFailure { block: u64, bits: u32 },
    /// Kept bits past the last full block, discarded without reconciliation.
    Unreconciled { bits: u64 },
    Verification { block: u64, seed: u64, tag_bits: u32, tag: Vec<u8> },
    PrivacyAmplification { generator: Vec<u8>, out_len: u64 },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub messages: Vec<Message>,
}

/// Disclosed-bit tallies relevant to the key length.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageAudit {
    /// Syndrome bits of blocks that were reconciled and verified.
    pub syndrome_bits: u64,
    /// Bits of blocks discarded after a failure.
    pub failed_bits: u64,
    pub unreconciled_bits: u64,
    pub tag_bits: u64,
    pub verified_blocks: u64,
    pub failed_blocks: u64,
}

impl Transcript {
    pub fn push(&mut self, m: Message) {
        self.messages.push(m);
    }

    pub fn audit(&self) -> LeakageAudit {
        let failed: std::collections::BTreeSet<u64> = self
            .messages
            .iter()
            .filter_map(|m| match m {
                Message::BlockFailure { block, .. } => Some(*block),
                _ => None,
            })
            .collect();
        let mut a = LeakageAudit::default();
        for m in &self.messages {
            match m {
                Message::Syndrome { block, bits, .. } if !failed.contains(block) => {
                    a.syndrome_bits += *bits as u64;
                    a.verified_blocks += 1;
                }
                Message::BlockFailure { bits, .. } => {
                    a.failed_bits += *bits as u64;
                    a.failed_blocks += 1;
                }
                Message::Unreconciled { bits } => a.unreconciled_bits += bits,
                Message::Verification { tag_bits, .. } => a.tag_bits += *tag_bits as u64,
                _ => {}
            }
        }
        a
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(TRANSCRIPT_MAGIC);
        out.extend_from_slice(&(self.messages.len() as u64).to_le_bytes());
        let bytes = |out: &mut Vec<u8>, b: &[u8]| {
            out.extend_from_slice(&(b.len() as u64).to_le_bytes());
            out.extend_from_slice(b);
        };
        for m in &self.messages {
            match m {
                Message::TestSelection { seed, count } => {
                    out.push(1);
                    out.extend_from_slice(&seed.to_le_bytes());
                    out.extend_from_slice(&count.to_le_bytes());
                }
                Message::Sifting { symbols, mask } => {
                    out.push(2);
                    out.extend_from_slice(&symbols.to_le_bytes());
                    bytes(&mut out, mask);
                }
                Message::Syndrome { code_id, block, bits, syndrome } => {
                    out.push(3);
                    out.extend_from_slice(&code_id.to_le_bytes());
                    out.extend_from_slice(&block.to_le_bytes());
                    out.extend_from_slice(&bits.to_le_bytes());
                    bytes(&mut out, syndrome);
                }
                Message::BlockFailure { block, bits } => {
                    out.push(4);
                    out.extend_from_slice(&block.to_le_bytes());
                    out.extend_from_slice(&bits.to_le_bytes());
                }
                Message::Unreconciled { bits } => {
                    out.push(5);
                    out.extend_from_slice(&bits.to_le_bytes());
                }
                Message::Verification { block, seed, tag_bits, tag } => {
                    out.push(6);
                    out.extend_from_slice(&block.to_le_bytes());
                    out.extend_from_slice(&seed.to_le_bytes());
                    out.extend_from_slice(&tag_bits.to_le_bytes());
                    bytes(&mut out, tag);
                }
                Message::PrivacyAmplification { generator, out_len } => {
                    out.push(7);
                    out.extend_from_slice(&out_len.to_le_bytes());
                    bytes(&mut out, generator);
                }
            }
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        r.magic(TRANSCRIPT_MAGIC)?;
        let count = r.u64()?;
        let mut messages = Vec::new();
        fn bytes(r: &mut Reader<'_>) -> Result<Vec<u8>> {
            let n = r.u64()? as usize;
            Ok(r.take(n)?.to_vec())
        }
        for _ in 0..count {
            let m = match r.u8()? {
                1 => Message::TestSelection { seed: r.u64()?, count: r.u64()? },
                2 => Message::Sifting { symbols: r.u64()?, mask: bytes(&mut r)? },
                3 => Message::Syndrome { code_id: r.u32()?, block: r.u64()?, bits: r.u32()?, syndrome: bytes(&mut r)? },
                4 => Message::BlockFailure { block: r.u64()?, bits: r.u32()? },
                5 => Message::Unreconciled { bits: r.u64()? },
                6 => Message::Verification { block: r.u64()?, seed: r.u64()?, tag_bits: r.u32()?, tag: bytes(&mut r)? },
                7 => {
                    let out_len = r.u64()?;
                    Message::PrivacyAmplification { generator: bytes(&mut r)?, out_len }
                }
                t => return Err(Error::Format(format!("unknown transcript message tag {t}"))),
            };
            messages.push(m);
        }
        if !r.done() {
            return Err(Error::Format("trailing bytes after transcript".into()));
        }
        Ok(Self { messages })
    }
}

/// Syndrome message for a block of `syndrome` bits (0/1 per byte).
pub fn syndrome_message(code_id: u32, block: u64, syndrome: &[u8]) -> Message {
    Message::Syndrome { code_id, block, bits: syndrome.len() as u32, syndrome: pack_bits(syndrome) }
}

//! On-disk formats: symbol frames, key strings, matrix dumps and keys.
//!
//! Binary files start with an 8-byte magic and store integers and floats
//! little-endian.

use std::io::{Read, Write};
use std::path::Path;

use dmcv_core::keymap::KeyString;
use dmcv_core::linalg::{CMat, C64};
use dmcv_core::simulator::SymbolFrame;
use dmcv_core::units::NuSample;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

pub const FRAME_MAGIC: &[u8; 8] = b"DMCVFRM1";
pub const KEYSTRING_MAGIC: &[u8; 8] = b"DMCVKEY1";

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, at: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| Error::Format("truncated input".into()))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn done(&self) -> bool {
        self.at == self.buf.len()
    }

    pub(crate) fn magic(&mut self, m: &[u8; 8]) -> Result<()> {
        if self.take(8)? != m {
            return Err(Error::Format(format!("bad magic, expected {}", String::from_utf8_lossy(m))));
        }
        Ok(())
    }
}

pub fn encode_frame(frame: &SymbolFrame) -> Vec<u8> {
    let n = frame.len();
    let mut out = Vec::with_capacity(16 + 17 * n);
    out.extend_from_slice(FRAME_MAGIC);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&frame.labels);
    for s in &frame.outcomes {
        out.extend_from_slice(&s.q.to_le_bytes());
        out.extend_from_slice(&s.p.to_le_bytes());
    }
    out
}

pub fn decode_frame(bytes: &[u8]) -> Result<SymbolFrame> {
    let mut r = Reader::new(bytes);
    r.magic(FRAME_MAGIC)?;
    let n = r.u64()? as usize;
    let labels = r.take(n)?.to_vec();
    let mut outcomes = Vec::with_capacity(n);
    for _ in 0..n {
        outcomes.push(NuSample { q: r.f64()?, p: r.f64()? });
    }
    if !r.done() {
        return Err(Error::Format("trailing bytes after frame".into()));
    }
    Ok(SymbolFrame::new(labels, outcomes)?)
}

pub fn encode_keystring(k: &KeyString) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(KEYSTRING_MAGIC);
    out.extend_from_slice(&(k.len() as u64).to_le_bytes());
    out.extend_from_slice(&k.pack());
    out
}

pub fn decode_keystring(bytes: &[u8]) -> Result<KeyString> {
    let mut r = Reader::new(bytes);
    r.magic(KEYSTRING_MAGIC)?;
    let n = r.u64()? as usize;
    let rest = r.take(bytes.len() - 16)?;
    Ok(KeyString::unpack(n, rest)?)
}

/// Bits (0/1 per byte) packed LSB first.
pub fn pack_bits(bits: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        out[i / 8] |= (b & 1) << (i % 8);
    }
    out
}

pub fn unpack_bits(bytes: &[u8], len: usize) -> Result<Vec<u8>> {
    if bytes.len() != len.div_ceil(8) {
        return Err(Error::Format(format!("{len} bits need {} bytes, got {}", len.div_ceil(8), bytes.len())));
    }
    Ok((0..len).map(|i| (bytes[i / 8] >> (i % 8)) & 1).collect())
}

/// Complex matrix as JSON: row-major real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDump {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixDump {
    pub fn from_mat(m: &CMat) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            re: m.data().iter().map(|z| z.re).collect(),
            im: m.data().iter().map(|z| z.im).collect(),
        }
    }

    pub fn to_mat(&self) -> Result<CMat> {
        if self.re.len() != self.rows * self.cols || self.im.len() != self.re.len() {
            return Err(Error::Format("matrix dump size mismatch".into()));
        }
        let data = self.re.iter().zip(&self.im).map(|(&a, &b)| C64::new(a, b)).collect();
        Ok(CMat::from_vec(self.rows, self.cols, data))
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    std::fs::File::open(path).and_then(|mut f| f.read_to_end(&mut out)).map_err(io_err(path))?;
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_file(path, text.as_bytes())
}

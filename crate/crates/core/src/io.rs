//! Little-endian binary formats for dense and blocked symmetric tensors.
//!
//! Dense (`STNS`): magic, `u16` version, `u16` order, `order` x `u64` dims,
//! then the entries as `f64` in dimensional order.
//!
//! Blocked (`BCSS`): magic, `u16` version, `u16` order, `u64` n, `u64` b, then
//! every canonical block in hypertriangle order, each in dimensional order.
//! The meta-grid is rebuilt on load.
//!
//! Decoders check every declared size against the bytes actually present
//! before allocating, so malformed input fails fast instead of exhausting
//! memory.

use std::fs;
use std::path::Path;

use crate::bcss::{BcssTensor, MAX_SYM_ORDER};
use crate::dense::DenseTensor;
use crate::error::{Error, Result};
use crate::sym_index::simplex_count;

pub const DENSE_MAGIC: &[u8; 4] = b"STNS";
pub const BCSS_MAGIC: &[u8; 4] = b"BCSS";
pub const FORMAT_VERSION: u16 = 1;

/// Largest meta-grid a decoded blocked tensor may require.
pub const MAX_DECODED_META_ENTRIES: u128 = 1 << 26;

fn decode_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Decode(msg.into()))
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return decode_err(format!("truncated input while reading {what}"));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<usize> {
        if self.take(4, "magic")? != magic {
            return decode_err(format!(
                "bad magic, expected {:?}",
                String::from_utf8_lossy(magic)
            ));
        }
        let version = self.u16("version")?;
        if version != FORMAT_VERSION {
            return decode_err(format!("unsupported format version {version}"));
        }
        let order = self.u16("order")?;
        if order == 0 {
            return decode_err("order must be positive");
        }
        Ok(order as usize)
    }

    /// Exactly `count` doubles and nothing after them.
    fn doubles(self, count: u128) -> Result<Vec<f64>> {
        let need = count.checked_mul(8);
        if need != Some(self.buf.len() as u128) {
            return decode_err(format!(
                "payload holds {} bytes but {count} doubles were declared",
                self.buf.len()
            ));
        }
        Ok(self
            .buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn to_usize(v: u64, what: &str) -> Result<usize> {
    match usize::try_from(v) {
        Ok(u) if u > 0 => Ok(u),
        _ => decode_err(format!("{what} {v} out of range")),
    }
}

pub fn encode_dense(t: &DenseTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * t.order() + 8 * t.len());
    out.extend_from_slice(DENSE_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(t.order() as u16).to_le_bytes());
    for &d in t.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_dense(bytes: &[u8]) -> Result<DenseTensor> {
    let mut r = Reader { buf: bytes };
    let order = r.header(DENSE_MAGIC)?;
    let mut dims = Vec::with_capacity(order.min(r.buf.len() / 8));
    let mut len: u128 = 1;
    for _ in 0..order {
        let d = to_usize(r.u64("dims")?, "dimension")?;
        len = len.saturating_mul(d as u128);
        dims.push(d);
    }
    let data = r.doubles(len)?;
    DenseTensor::from_vec(&dims, data).map_err(|e| Error::Decode(e.to_string()))
}

pub fn encode_bcss(t: &BcssTensor) -> Vec<u8> {
    let payload = t.storage().payload as usize;
    let mut out = Vec::with_capacity(24 + 8 * payload);
    out.extend_from_slice(BCSS_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(t.order() as u16).to_le_bytes());
    out.extend_from_slice(&(t.dim() as u64).to_le_bytes());
    out.extend_from_slice(&(t.block_dim() as u64).to_le_bytes());
    for (_, block) in t.canonical_blocks() {
        for &v in block.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_bcss(bytes: &[u8]) -> Result<BcssTensor> {
    let mut r = Reader { buf: bytes };
    let order = r.header(BCSS_MAGIC)?;
    if order > MAX_SYM_ORDER {
        return decode_err(format!("order {order} exceeds {MAX_SYM_ORDER}"));
    }
    let n = to_usize(r.u64("n")?, "n")?;
    let b = to_usize(r.u64("b")?, "block dimension")?;
    if n % b != 0 {
        return decode_err(format!("block dimension {b} does not divide {n}"));
    }
    let nbar = n / b;
    let meta = (nbar as u128)
        .checked_pow(order as u32)
        .filter(|&m| m <= MAX_DECODED_META_ENTRIES);
    if meta.is_none() {
        return decode_err(format!("block grid {nbar}^{order} too large"));
    }
    let block_len = (b as u128)
        .checked_pow(order as u32)
        .ok_or(Error::Decode("block size overflows".into()))?;
    let blocks = simplex_count(nbar, order)?;
    let total = blocks
        .checked_mul(block_len)
        .ok_or(Error::Decode("payload size overflows".into()))?;
    let data = r.doubles(total)?;
    let block_dims = vec![b; order];
    let blocks = data
        .chunks_exact(block_len as usize)
        .map(|c| DenseTensor::from_vec(&block_dims, c.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    BcssTensor::from_blocks(order, n, b, blocks).map_err(|e| Error::Decode(e.to_string()))
}

/// I/O failures are folded into [`Error::Decode`] with the path attached.
pub fn read_dense(path: &Path) -> Result<DenseTensor> {
    let bytes = fs::read(path).map_err(|e| Error::Decode(format!("{}: {e}", path.display())))?;
    decode_dense(&bytes)
}

pub fn write_dense(path: &Path, t: &DenseTensor) -> Result<()> {
    fs::write(path, encode_dense(t)).map_err(|e| Error::Decode(format!("{}: {e}", path.display())))
}

pub fn read_bcss(path: &Path) -> Result<BcssTensor> {
    let bytes = fs::read(path).map_err(|e| Error::Decode(format!("{}: {e}", path.display())))?;
    decode_bcss(&bytes)
}

pub fn write_bcss(path: &Path, t: &BcssTensor) -> Result<()> {
    fs::write(path, encode_bcss(t)).map_err(|e| Error::Decode(format!("{}: {e}", path.display())))
}

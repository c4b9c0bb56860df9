//! `PPNC` binary checkpoints.
//!
//! Layout, all integers unsigned 32-bit little-endian:
//!
//! ```text
//! "PPNC" | version | tensor count
//! per tensor: name length | UTF-8 name | rank | dims[rank] | f32 LE data
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{ModelParams, Tensor};

pub const MAGIC: &[u8; 4] = b"PPNC";
pub const FORMAT_VERSION: u32 = 1;

pub fn save_checkpoint(params: &ModelParams<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// Exact encoded size of `params`.
pub fn encoded_len(params: &ModelParams<f32>) -> usize {
    12 + params
        .entries()
        .iter()
        .map(|e| 4 + e.name.len() + 4 + 4 * e.tensor.shape().len() + 4 * e.tensor.len())
        .sum::<usize>()
}

pub fn encode_checkpoint(params: &ModelParams<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(encoded_len(params));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for e in params.entries() {
        out.extend_from_slice(&(e.name.len() as u32).to_le_bytes());
        out.extend_from_slice(e.name.as_bytes());
        out.extend_from_slice(&(e.tensor.shape().len() as u32).to_le_bytes());
        for &d in e.tensor.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in e.tensor.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModelParams<f32>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::format("checkpoint", "bad magic"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::format(
            "checkpoint",
            format!("version mismatch: file {version}, supported {FORMAT_VERSION}"),
        ));
    }
    let count = r.u32()? as usize;
    let mut params = ModelParams::new();
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::format("checkpoint", "tensor name is not UTF-8"))?
            .to_owned();
        let rank = r.u32()? as usize;
        let shape = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let numel: usize = shape.iter().product();
        let data = r.take(numel.checked_mul(4).ok_or_else(|| {
            Error::format("checkpoint", format!("tensor `{name}` too large"))
        })?)?;
        let values = data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        params.insert(name, Tensor::new(shape, values)?)?;
    }
    if r.pos != bytes.len() {
        return Err(Error::format(
            "checkpoint",
            format!("{} trailing bytes", bytes.len() - r.pos),
        ));
    }
    Ok(params)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format("checkpoint", "truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ModelParams<f32> {
        let mut p = ModelParams::new();
        p.insert("a.weight", Tensor::new(vec![2, 3], vec![1.0, -2.5, 3.0, 0.0, f32::MIN_POSITIVE, 7.0]).unwrap())
            .unwrap();
        p.insert("a.bias", Tensor::new(vec![3], vec![0.1, 0.2, 0.3]).unwrap())
            .unwrap();
        p
    }

    #[test]
    fn size_matches_format_definition() {
        let p = sample();
        // header 12; "a.weight": 4+8+4+8+24 = 48; "a.bias": 4+6+4+4+12 = 30
        assert_eq!(encoded_len(&p), 12 + 48 + 30);
        assert_eq!(encode_checkpoint(&p).len(), 90);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = encode_checkpoint(&sample());
        bytes[0] = b'X';
        assert!(decode_checkpoint(&bytes).unwrap_err().to_string().contains("bad magic"));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let mut bytes = encode_checkpoint(&sample());
        bytes[4] = 9;
        assert!(decode_checkpoint(&bytes).unwrap_err().to_string().contains("version"));
    }

    #[test]
    fn every_truncation_is_rejected() {
        let bytes = encode_checkpoint(&sample());
        for cut in 0..bytes.len() {
            assert!(decode_checkpoint(&bytes[..cut]).is_err(), "cut at {cut}");
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = sample();
        let q = decode_checkpoint(&encode_checkpoint(&p)).unwrap();
        for (a, b) in p.entries().iter().zip(q.entries()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.tensor.shape(), b.tensor.shape());
            let abits: Vec<u32> = a.tensor.values().iter().map(|v| v.to_bits()).collect();
            let bbits: Vec<u32> = b.tensor.values().iter().map(|v| v.to_bits()).collect();
            assert_eq!(abits, bbits);
        }
    }
}

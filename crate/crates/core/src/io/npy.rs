//! Minimal reader for NumPy `.npy` arrays (C order, little-endian numerics).

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

pub fn read_npy(path: impl AsRef<Path>) -> Result<NpyArray> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_npy(&bytes)
}

fn header_value<'a>(header: &'a str, key: &str) -> Result<&'a str> {
    let pat = format!("'{key}':");
    let start = header
        .find(&pat)
        .ok_or_else(|| Error::format("npy", format!("header lacks `{key}`")))?
        + pat.len();
    Ok(header[start..].trim_start())
}

fn parse_shape(header: &str) -> Result<Vec<usize>> {
    let rest = header_value(header, "shape")?;
    let inner = rest
        .strip_prefix('(')
        .and_then(|r| r.split_once(')'))
        .map(|(s, _)| s)
        .ok_or_else(|| Error::format("npy", "bad shape tuple"))?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::format("npy", format!("bad dimension `{s}`"))))
        .collect()
}

pub fn decode_npy(bytes: &[u8]) -> Result<NpyArray> {
    if bytes.len() < 10 || &bytes[..6] != b"\x93NUMPY" {
        return Err(Error::format("npy", "missing magic"));
    }
    let (header_len, offset) = match bytes[6] {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 if bytes.len() >= 12 => (u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize, 12),
        v => return Err(Error::format("npy", format!("unsupported version {v}"))),
    };
    let body = offset + header_len;
    if bytes.len() < body {
        return Err(Error::format("npy", "truncated header"));
    }
    let header = std::str::from_utf8(&bytes[offset..body]).map_err(|_| Error::format("npy", "header is not utf-8"))?;
    if header_value(header, "fortran_order")?.starts_with("True") {
        return Err(Error::format("npy", "fortran order is not supported"));
    }
    let descr = header_value(header, "descr")?
        .trim_start_matches('\'')
        .split('\'')
        .next()
        .unwrap_or("")
        .to_string();
    let shape = parse_shape(header)?;
    let count: usize = shape.iter().product();
    let raw = &bytes[body..];
    let (width, convert): (usize, fn(&[u8]) -> f64) = match descr.as_str() {
        "<f4" => (4, |b| f32::from_le_bytes(b.try_into().unwrap()) as f64),
        "<f8" => (8, |b| f64::from_le_bytes(b.try_into().unwrap())),
        "<u2" => (2, |b| u16::from_le_bytes(b.try_into().unwrap()) as f64),
        "<i2" => (2, |b| i16::from_le_bytes(b.try_into().unwrap()) as f64),
        "<i4" => (4, |b| i32::from_le_bytes(b.try_into().unwrap()) as f64),
        "|u1" => (1, |b| b[0] as f64),
        other => return Err(Error::format("npy", format!("unsupported dtype `{other}`"))),
    };
    if raw.len() < count * width {
        return Err(Error::format(
            "npy",
            format!("expected {} data bytes, found {}", count * width, raw.len()),
        ));
    }
    let data = raw[..count * width].chunks_exact(width).map(convert).collect();
    Ok(NpyArray { shape, data })
}

#[cfg(test)]
pub(crate) fn encode_npy_f32(shape: &[usize], data: &[f32]) -> Vec<u8> {
    let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
    let tuple = if dims.len() == 1 { format!("{},", dims[0]) } else { dims.join(", ") };
    let mut header = format!("{{'descr': '<f4', 'fortran_order': False, 'shape': ({tuple}), }}");
    while (10 + header.len() + 1) % 64 != 0 {
        header.push(' ');
    }
    header.push('\n');
    let mut out = b"\x93NUMPY\x01\x00".to_vec();
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

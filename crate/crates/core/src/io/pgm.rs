//! Binary 16-bit PGM (`P5`, maxval 65535, big-endian samples).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::DepthImage;

pub fn read_depth_pgm(path: impl AsRef<Path>) -> Result<DepthImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_depth_pgm(&bytes)
}

pub fn write_depth_pgm(img: &DepthImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_depth_pgm(img)).map_err(|e| Error::io(path, e))
}

pub fn encode_depth_pgm(img: &DepthImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width(), img.height()).into_bytes();
    out.reserve(img.data().len() * 2);
    for &d in img.data() {
        out.extend_from_slice(&d.to_be_bytes());
    }
    out
}

pub fn decode_depth_pgm(bytes: &[u8]) -> Result<DepthImage> {
    let mut cursor = HeaderCursor { bytes, pos: 0 };
    let magic = cursor.token()?;
    if magic != b"P5" {
        return Err(Error::format("PGM", "missing P5 magic"));
    }
    let width = cursor.number("width")?;
    let height = cursor.number("height")?;
    let maxval = cursor.number("maxval")?;
    if maxval != 65535 {
        return Err(Error::UnsupportedMaxval(maxval as u32));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => return Err(Error::format("PGM", "header not terminated")),
    }
    let raster = &bytes[cursor.pos..];
    let needed = width * height * 2;
    if raster.len() < needed {
        return Err(Error::format(
            "PGM",
            format!("truncated raster: {} of {} bytes", raster.len(), needed),
        ));
    }
    let data = raster[..needed]
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    DepthImage::new(width, height, data)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format("PGM", "unexpected end of header"));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format("PGM", format!("bad {what}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_two_by_one() {
        let mut bytes = b"P5\n2 1\n65535\n".to_vec();
        bytes.extend_from_slice(&1000u16.to_be_bytes());
        bytes.extend_from_slice(&0u16.to_be_bytes());
        let img = decode_depth_pgm(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 1));
        assert_eq!(img.data(), &[1000, 0]);
    }

    #[test]
    fn rejects_8bit_maxval() {
        let bytes = b"P5\n1 1\n255\n\x00".to_vec();
        let err = decode_depth_pgm(&bytes).unwrap_err();
        assert!(err.to_string().contains("unsupported maxval"));
    }

    #[test]
    fn rejects_truncated_raster() {
        let bytes = b"P5\n2 2\n65535\n\x00\x01\x00".to_vec();
        assert!(matches!(
            decode_depth_pgm(&bytes),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn rejects_wrong_magic() {
        assert!(decode_depth_pgm(b"P2\n1 1\n65535\n0").is_err());
        assert!(decode_depth_pgm(b"").is_err());
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5\n# from sensor\n1 1\n65535\n".to_vec();
        bytes.extend_from_slice(&513u16.to_be_bytes());
        assert_eq!(decode_depth_pgm(&bytes).unwrap().data(), &[513]);
    }

    #[test]
    fn encoded_bytes_follow_pgm_layout() {
        let img = DepthImage::new(2, 1, vec![0x0102, 0xfffe]).unwrap();
        let bytes = encode_depth_pgm(&img);
        let header = b"P5\n2 1\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0x01, 0x02, 0xff, 0xfe]);
    }
}

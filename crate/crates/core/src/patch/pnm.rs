//! Binary PGM (P5) and PPM (P6) codec.
//!
//! PGM with maxval <= 255 decodes to 8-bit gray, maxval > 255 to 16-bit
//! big-endian samples (depth maps in millimeters). PPM is 8-bit only.
//! Sample values are returned as stored, without rescaling to maxval.

use super::raster::{Raster, Rgb};
use crate::error::{Error, Result};

/// Upper bound on decoded pixel count, so corrupt headers cannot request
/// absurd allocations.
pub const MAX_PIXELS: usize = 1 << 26;

#[derive(Debug, Clone, PartialEq)]
pub enum Pnm {
    Gray8(Raster<u8>),
    Gray16(Raster<u16>),
    Rgb8(Raster<Rgb>),
}

struct Header {
    kind: u8,
    width: usize,
    height: usize,
    maxval: u32,
    data_offset: usize,
}

fn skip_space_and_comments(bytes: &[u8], mut pos: usize) -> usize {
    loop {
        match bytes.get(pos) {
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(pos) {
                    pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            }
            _ => return pos,
        }
    }
}

fn read_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<u32> {
    *pos = skip_space_and_comments(bytes, *pos);
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Malformed(format!("PNM header: expected {what}")));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Malformed(format!("PNM header: {what} out of range")))
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 || bytes[0] != b'P' || !matches!(bytes[1], b'5' | b'6') {
        return Err(Error::BadMagic {
            expected: *b"P5\0\0",
            found: bytes[..bytes.len().min(2)].to_vec(),
        });
    }
    let mut pos = 2;
    let width = read_number(bytes, &mut pos, "width")? as usize;
    let height = read_number(bytes, &mut pos, "height")? as usize;
    let maxval = read_number(bytes, &mut pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Malformed(format!("PNM size {width}x{height} is empty")));
    }
    if width.saturating_mul(height) > MAX_PIXELS {
        return Err(Error::Malformed(format!("PNM size {width}x{height} too large")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Malformed(format!("PNM maxval {maxval} outside 1..=65535")));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Malformed("PNM header: missing whitespace before raster".into())),
    }
    Ok(Header {
        kind: bytes[1],
        width,
        height,
        maxval,
        data_offset: pos,
    })
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Pnm> {
    let h = parse_header(bytes)?;
    let pixels = h.width * h.height;
    let (channels, sample_bytes) = match (h.kind, h.maxval > 255) {
        (b'5', false) => (1, 1),
        (b'5', true) => (1, 2),
        (b'6', false) => (3, 1),
        _ => return Err(Error::Malformed("16-bit PPM is not supported".into())),
    };
    let needed = pixels * channels * sample_bytes;
    let body = &bytes[h.data_offset..];
    if body.len() < needed {
        return Err(Error::Truncated {
            offset: h.data_offset,
            needed,
            available: body.len(),
        });
    }
    let body = &body[..needed];
    let too_big = |v: u32| Error::Malformed(format!("PNM sample {v} exceeds maxval {}", h.maxval));
    match (channels, sample_bytes) {
        (1, 1) => {
            if let Some(&v) = body.iter().find(|&&v| u32::from(v) > h.maxval) {
                return Err(too_big(v.into()));
            }
            Ok(Pnm::Gray8(Raster::new(h.width, h.height, body.to_vec())?))
        }
        (1, 2) => {
            let data: Vec<u16> = body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
            if let Some(&v) = data.iter().find(|&&v| u32::from(v) > h.maxval) {
                return Err(too_big(v.into()));
            }
            Ok(Pnm::Gray16(Raster::new(h.width, h.height, data)?))
        }
        _ => {
            if let Some(&v) = body.iter().find(|&&v| u32::from(v) > h.maxval) {
                return Err(too_big(v.into()));
            }
            let data = body.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
            Ok(Pnm::Rgb8(Raster::new(h.width, h.height, data)?))
        }
    }
}

pub fn encode_pgm8(r: &Raster<u8>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", r.width(), r.height()).into_bytes();
    out.extend_from_slice(r.data());
    out
}

pub fn encode_pgm16(r: &Raster<u16>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", r.width(), r.height()).into_bytes();
    for v in r.data() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

pub fn encode_ppm(r: &Raster<Rgb>) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", r.width(), r.height()).into_bytes();
    for px in r.data() {
        out.extend_from_slice(px);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_with_comments() {
        let mut bytes = b"P5 # comment\n2 # w\n1\n255\n".to_vec();
        bytes.extend_from_slice(&[7, 9]);
        assert_eq!(decode_pnm(&bytes).unwrap(), Pnm::Gray8(Raster::new(2, 1, vec![7, 9]).unwrap()));
    }

    #[test]
    fn sixteen_bit_is_big_endian() {
        let mut bytes = b"P5\n1 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0x03, 0xE8]);
        assert_eq!(decode_pnm(&bytes).unwrap(), Pnm::Gray16(Raster::new(1, 1, vec![1000]).unwrap()));
    }

    #[test]
    fn errors() {
        assert!(matches!(decode_pnm(b"P3\n1 1\n255\n1"), Err(Error::BadMagic { .. })));
        assert!(matches!(decode_pnm(b"P5\n2 2\n255\n\x01"), Err(Error::Truncated { .. })));
        assert!(matches!(decode_pnm(b"P5\n0 2\n255\n"), Err(Error::Malformed(_))));
        assert!(matches!(decode_pnm(b"P5\n1 1\n100\n\xff"), Err(Error::Malformed(_))));
        assert!(matches!(decode_pnm(b"P6\n1 1\n65535\n\0\0\0\0\0\0"), Err(Error::Malformed(_))));
    }

    proptest! {
        #[test]
        fn encoders_round_trip(w in 1usize..6, h in 1usize..6, seed in any::<u64>()) {
            let n = w * h;
            let g8: Vec<u8> = (0..n).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 7) as u8).collect();
            let g16: Vec<u16> = (0..n).map(|i| (seed.wrapping_mul(i as u64 + 3) >> 11) as u16).collect();
            let rgb: Vec<Rgb> = g8.iter().map(|&v| [v, v.wrapping_add(1), v.wrapping_mul(3)]).collect();
            let r8 = Raster::new(w, h, g8).unwrap();
            let r16 = Raster::new(w, h, g16).unwrap();
            let rc = Raster::new(w, h, rgb).unwrap();
            prop_assert_eq!(decode_pnm(&encode_pgm8(&r8)).unwrap(), Pnm::Gray8(r8));
            prop_assert_eq!(decode_pnm(&encode_pgm16(&r16)).unwrap(), Pnm::Gray16(r16));
            prop_assert_eq!(decode_pnm(&encode_ppm(&rc)).unwrap(), Pnm::Rgb8(rc));
        }
    }
}

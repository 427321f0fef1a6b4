//! Binary Netpbm: P5 (grayscale) and P6 (RGB), maxval 255 only.

use super::{Plane, RgbImage};
use crate::error::{Error, Result};

/// A decoded image: grayscale samples become a [`Plane`].
#[derive(Clone, Debug, PartialEq)]
pub enum Image {
    Gray(Plane),
    Rgb(RgbImage),
}

impl Image {
    pub fn height(&self) -> usize {
        match self {
            Image::Gray(p) => p.height(),
            Image::Rgb(i) => i.height(),
        }
    }

    pub fn width(&self) -> usize {
        match self {
            Image::Gray(p) => p.width(),
            Image::Rgb(i) => i.width(),
        }
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_whitespace(&mut self) -> Result<()> {
        let start = self.pos;
        loop {
            match self.bytes.get(self.pos) {
                Some(b' ' | b'\t' | b'\n' | b'\r' | b'\x0b' | b'\x0c') => self.pos += 1,
                Some(b'#') => {
                    while !matches!(self.bytes.get(self.pos), None | Some(b'\n' | b'\r')) {
                        self.pos += 1;
                    }
                }
                Some(_) if self.pos > start => return Ok(()),
                Some(_) => return Err(Error::PnmHeader(format!("expected whitespace at byte {}", self.pos))),
                None => return Err(Error::PnmHeader("unexpected end of header".into())),
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_whitespace()?;
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::PnmHeader(format!("bad {what} at byte {start}")))
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(Error::PnmBadMagic),
    };
    let mut hdr = Header { bytes, pos: 2 };
    let width = hdr.number("width")? as usize;
    let height = hdr.number("height")? as usize;
    let maxval = hdr.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::PnmHeader(format!("zero-sized image {width}x{height}")));
    }
    if maxval != 255 {
        return Err(Error::PnmUnsupportedMaxval(maxval));
    }
    // Exactly one whitespace byte separates maxval from the raster.
    match bytes.get(hdr.pos) {
        Some(b) if b.is_ascii_whitespace() => hdr.pos += 1,
        _ => return Err(Error::PnmHeader("missing whitespace after maxval".into())),
    }
    let expected = width * height * channels;
    let raster = &bytes[hdr.pos..];
    if raster.len() < expected {
        return Err(Error::PnmTruncated {
            expected,
            found: raster.len(),
        });
    }
    let raster = &raster[..expected];
    Ok(if channels == 1 {
        Image::Gray(Plane::from_bytes(height, width, raster)?)
    } else {
        Image::Rgb(RgbImage::new(height, width, raster.to_vec())?)
    })
}

/// Canonical form: `P5\n<w> <h>\n255\n` followed by the raster.
pub fn encode_pnm(image: &Image) -> Vec<u8> {
    match image {
        Image::Gray(p) => encode_raw(b"P5", p.height(), p.width(), &p.to_bytes()),
        Image::Rgb(i) => encode_raw(b"P6", i.height(), i.width(), i.samples()),
    }
}

fn encode_raw(magic: &[u8], height: usize, width: usize, raster: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(raster.len() + 20);
    out.extend_from_slice(magic);
    out.extend_from_slice(format!("\n{width} {height}\n255\n").as_bytes());
    out.extend_from_slice(raster);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_built_p5() {
        let mut bytes = b"P5 2 2 255\n".to_vec();
        bytes.extend_from_slice(&[0, 128, 255, 64]);
        let Image::Gray(p) = decode_pnm(&bytes).unwrap() else { panic!("expected gray") };
        assert_eq!((p.height(), p.width()), (2, 2));
        assert_eq!(p.values(), [0.0, 128.0, 255.0, 64.0]);
    }

    #[test]
    fn canonical_round_trip() {
        let mut gray = b"P5\n3 2\n255\n".to_vec();
        gray.extend_from_slice(&[1, 2, 3, 250, 251, 0]);
        assert_eq!(encode_pnm(&decode_pnm(&gray).unwrap()), gray);

        let mut rgb = b"P6\n2 1\n255\n".to_vec();
        rgb.extend_from_slice(&[9, 8, 7, 6, 5, 4]);
        assert_eq!(encode_pnm(&decode_pnm(&rgb).unwrap()), rgb);
    }

    #[test]
    fn comments_and_mixed_whitespace() {
        let mut bytes = b"P6\n# made by hand\n1\t1 # trailing\n255\r".to_vec();
        bytes.extend_from_slice(&[10, 20, 30]);
        let Image::Rgb(img) = decode_pnm(&bytes).unwrap() else { panic!("expected rgb") };
        assert_eq!(img.pixel(0, 0), [10, 20, 30]);
    }

    #[test]
    fn raster_may_start_with_whitespace_bytes() {
        // The single separator is consumed; a raster value of 10 ('\n') is data.
        let mut bytes = b"P5 2 1 255\n".to_vec();
        bytes.extend_from_slice(b"\n ");
        let Image::Gray(p) = decode_pnm(&bytes).unwrap() else { panic!() };
        assert_eq!(p.values(), [10.0, 32.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(decode_pnm(b"P3 1 1 255\n1 2 3"), Err(Error::PnmBadMagic)));
        assert!(matches!(decode_pnm(b"P6 1 1 65535\n\0\0\0\0\0\0"), Err(Error::PnmUnsupportedMaxval(65535))));
        assert!(matches!(
            decode_pnm(b"P5 2 2 255\n\x01\x02"),
            Err(Error::PnmTruncated { expected: 4, found: 2 })
        ));
        assert!(matches!(decode_pnm(b"P5 2"), Err(Error::PnmHeader(_))));
        assert!(matches!(decode_pnm(b"P5 0 2 255\n"), Err(Error::PnmHeader(_))));
    }
}

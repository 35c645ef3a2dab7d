//! Binary netpbm (P5 gray, P6 RGB) with maxval 255.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PnmError {
    #[error("bad magic {0:?}: only binary P5 and P6 are supported")]
    BadMagic(String),
    #[error("unsupported maxval {0}: only 255 is supported")]
    UnsupportedMaxval(u32),
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("truncated pixel data: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

/// 8-bit image, row-major, channels interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageU8 {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub pixels: Vec<u8>,
}

impl ImageU8 {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        pixels: Vec<u8>,
    ) -> Result<Self, PnmError> {
        if width == 0 || height == 0 || !(channels == 1 || channels == 3) {
            return Err(PnmError::BadHeader(format!(
                "{width}x{height} with {channels} channels"
            )));
        }
        if pixels.len() != width * height * channels {
            return Err(PnmError::Truncated {
                expected: width * height * channels,
                found: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self
                    .bytes
                    .get(self.pos)
                    .is_some_and(|&c| c != b'\n' && c != b'\r')
                {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, PnmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PnmError::BadHeader(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| PnmError::BadHeader(format!("{what} out of range")))
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<ImageU8, PnmError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => {
            let head = &bytes[..bytes.len().min(2)];
            return Err(PnmError::BadMagic(
                String::from_utf8_lossy(head).into_owned(),
            ));
        }
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")? as usize;
    let height = h.number("height")? as usize;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PnmError::BadHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(PnmError::UnsupportedMaxval(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => {
            return Err(PnmError::BadHeader(
                "missing whitespace after maxval".into(),
            ))
        }
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| PnmError::BadHeader("dimensions overflow".into()))?;
    let raster = &bytes[h.pos..];
    if raster.len() < expected {
        return Err(PnmError::Truncated {
            expected,
            found: raster.len(),
        });
    }
    ImageU8::new(width, height, channels, raster[..expected].to_vec())
}

/// Minimal encoder, the inverse of [`decode_pnm`].
pub fn encode_pnm(img: &ImageU8) -> Vec<u8> {
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decodes_gray() {
        let mut b = b"P5\n2 2\n255\n".to_vec();
        b.extend([0, 64, 128, 255]);
        let img = decode_pnm(&b).unwrap();
        assert_eq!((img.width, img.height, img.channels), (2, 2, 1));
        assert_eq!(img.pixels, vec![0, 64, 128, 255]);
    }

    #[test]
    fn decodes_rgb_with_comments() {
        let mut b = b"P6 # made by hand\n# another\n1\t1\r\n255\n".to_vec();
        b.extend([255, 0, 0]);
        let img = decode_pnm(&b).unwrap();
        assert_eq!((img.width, img.height, img.channels), (1, 1, 3));
        assert_eq!(img.pixels, vec![255, 0, 0]);
    }

    #[test]
    fn distinct_errors() {
        assert!(matches!(
            decode_pnm(b"P7\n1 1\n255\n\0"),
            Err(PnmError::BadMagic(_))
        ));
        assert!(matches!(decode_pnm(b""), Err(PnmError::BadMagic(_))));
        assert_eq!(
            decode_pnm(b"P5\n1 1\n65535\n\0\0"),
            Err(PnmError::UnsupportedMaxval(65535))
        );
        assert_eq!(
            decode_pnm(b"P5\n2 2\n255\n\0\0"),
            Err(PnmError::Truncated {
                expected: 4,
                found: 2
            })
        );
        assert!(matches!(
            decode_pnm(b"P5\nx 2\n255\n"),
            Err(PnmError::BadHeader(_))
        ));
        assert!(matches!(
            decode_pnm(b"P5\n0 2\n255\n"),
            Err(PnmError::BadHeader(_))
        ));
    }

    #[test]
    fn raster_may_start_with_whitespace_byte() {
        // pixel value 10 is '\n'; only one separator byte is consumed
        let img = decode_pnm(b"P5\n2 1\n255\n\n\n").unwrap();
        assert_eq!(img.pixels, vec![10, 10]);
    }

    proptest! {
        #[test]
        fn roundtrip(w in 1usize..9, h in 1usize..9, rgb in any::<bool>(), seed in any::<u64>()) {
            let c = if rgb { 3 } else { 1 };
            let mut rng = crate::rng::SplitMix64::new(seed);
            let px = (0..w * h * c).map(|_| rng.below(256) as u8).collect();
            let img = ImageU8::new(w, h, c, px).unwrap();
            prop_assert_eq!(decode_pnm(&encode_pnm(&img)).unwrap(), img);
        }
    }
}

//! Binary PGM (`P5`) / PPM (`P6`) images with maxval 255.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major 8-bit raster with interleaved channels (1 = gray, 3 = RGB).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageU8 {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl ImageU8 {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        let img = Self {
            height,
            width,
            channels,
            data,
        };
        img.validate()?;
        Ok(img)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    /// Checks the structural invariants. Fields are public, so writers re-check.
    pub fn validate(&self) -> Result<()> {
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::Contract(format!(
                "image must have 1 or 3 channels, got {}",
                self.channels
            )));
        }
        if self.height == 0 || self.width == 0 {
            return Err(Error::Contract("image dimensions must be >= 1".into()));
        }
        if self.data.len() != self.height * self.width * self.channels {
            return Err(Error::Contract(format!(
                "data length {} != {}x{}x{}",
                self.data.len(),
                self.height,
                self.width,
                self.channels
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn same_dims(&self, other: &ImageU8) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            msg: msg.into(),
        }
    }

    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        let mut value: usize = 0;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            let digit = (self.bytes[self.pos] - b'0') as usize;
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(digit))
                .ok_or_else(|| self.err(format!("{what} overflows")))?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err(format!("expected {what}")));
        }
        Ok(value)
    }
}

/// Decodes an in-memory P5/P6 file.
pub fn decode_image(bytes: &[u8]) -> Result<ImageU8> {
    let mut cur = HeaderCursor { bytes, pos: 0 };
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(cur.err("missing P5/P6 magic"));
    }
    let channels = match bytes[1] {
        b'5' => 1,
        b'6' => 3,
        _ => {
            cur.pos = 1;
            return Err(cur.err("unsupported magic, expected P5 or P6"));
        }
    };
    cur.pos = 2;
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    cur.skip_whitespace_and_comments();
    let maxval_offset = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(Error::Parse {
            offset: maxval_offset,
            msg: format!("maxval {maxval} unsupported, expected 255"),
        });
    }
    if width == 0 || height == 0 {
        return Err(cur.err("zero image dimension"));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(cur.err("expected single whitespace after maxval")),
    }
    let expected = width
        .checked_mul(height)
        .and_then(|v| v.checked_mul(channels))
        .ok_or_else(|| cur.err("image dimensions overflow"))?;
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        return Err(Error::Truncation {
            expected,
            found: payload.len(),
        });
    }
    ImageU8::new(height, width, channels, payload[..expected].to_vec())
}

/// Encodes to the canonical header form `P5\n<w> <h>\n255\n`.
pub fn encode_image(img: &ImageU8) -> Result<Vec<u8>> {
    img.validate()?;
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    Ok(out)
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ImageU8> {
    let bytes = fs::read(path)?;
    decode_image(&bytes)
}

pub fn write_image(img: &ImageU8, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_image(img)?;
    fs::write(path, bytes)?;
    Ok(())
}

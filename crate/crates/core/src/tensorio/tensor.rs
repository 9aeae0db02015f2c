//! Dense `C x H x W` feature tensors and the `WFPN` binary record format.
//!
//! A record is the 4-byte magic `WFPN`, three little-endian `u32` dims
//! `(C, H, W)`, then `C*H*W` little-endian `f32` values. Files may hold
//! several records back to back.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const TENSOR_MAGIC: &[u8; 4] = b"WFPN";
const HEADER_LEN: usize = 16;

/// Row-major `channels x height x width` tensor of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        let expected = channels
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| Error::Validation("tensor dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(Error::Validation(format!(
                "tensor data length {} != {channels}x{height}x{width}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![T::zero(); channels * height * width],
        }
    }

    /// Builds a tensor from `f(c, y, x)`. Panics if `f` yields a non-finite value.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, data).expect("from_fn produced non-finite value")
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }
    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }
    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }
    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }
    pub fn into_data(self) -> Vec<T> {
        self.data
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[T] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn cast<U: Scalar>(&self) -> FeatureMap<U> {
        FeatureMap {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| v.cast()).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &FeatureMap<T>) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }

    pub fn energy(&self) -> T {
        self.data.iter().map(|v| *v * *v).sum()
    }
}

/// Serializes one tensor record.
pub fn encode_tensor(t: &FeatureMap<f32>, out: &mut Vec<u8>) -> Result<()> {
    let dim = |v: usize| {
        u32::try_from(v).map_err(|_| Error::Validation(format!("dimension {v} exceeds u32")))
    };
    out.extend_from_slice(TENSOR_MAGIC);
    for d in [t.channels, t.height, t.width] {
        out.extend_from_slice(&dim(d)?.to_le_bytes());
    }
    for v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

/// Decodes one record starting at `bytes[0]`, returning it and the bytes consumed.
pub fn decode_tensor(bytes: &[u8]) -> Result<(FeatureMap<f32>, usize)> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && &bytes[..4] != TENSOR_MAGIC {
            return Err(Error::Format("bad tensor magic".into()));
        }
        return Err(Error::Truncation {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if &bytes[..4] != TENSOR_MAGIC {
        return Err(Error::Format(format!(
            "bad tensor magic {:?}",
            String::from_utf8_lossy(&bytes[..4])
        )));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (c, h, w) = (dim(0), dim(1), dim(2));
    let count = c
        .checked_mul(h)
        .and_then(|v| v.checked_mul(w))
        .ok_or_else(|| Error::Format("tensor dimensions overflow".into()))?;
    let payload_len = count
        .checked_mul(4)
        .ok_or_else(|| Error::Format("tensor payload overflows".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < payload_len {
        return Err(Error::Truncation {
            expected: payload_len,
            found: payload.len(),
        });
    }
    let data: Vec<f32> = payload[..payload_len]
        .chunks_exact(4)
        .map(|ch| f32::from_le_bytes(ch.try_into().unwrap()))
        .collect();
    if let Some(i) = data.iter().position(|v| v.is_nan()) {
        return Err(Error::Validation(format!("NaN in tensor payload at index {i}")));
    }
    Ok((FeatureMap::new(c, h, w, data)?, HEADER_LEN + payload_len))
}

/// Decodes a whole buffer of back-to-back records.
pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<FeatureMap<f32>>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let (t, used) = decode_tensor(&bytes[pos..])?;
        out.push(t);
        pos += used;
    }
    Ok(out)
}

/// Reads a file holding exactly one tensor record.
pub fn read_tensor(path: impl AsRef<Path>) -> Result<FeatureMap<f32>> {
    let bytes = fs::read(path)?;
    let (t, used) = decode_tensor(&bytes)?;
    if used != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after tensor record",
            bytes.len() - used
        )));
    }
    Ok(t)
}

pub fn write_tensor(t: &FeatureMap<f32>, path: impl AsRef<Path>) -> Result<()> {
    write_tensors(std::slice::from_ref(t), path)
}

pub fn read_tensors(path: impl AsRef<Path>) -> Result<Vec<FeatureMap<f32>>> {
    decode_tensors(&fs::read(path)?)
}

pub fn write_tensors(ts: &[FeatureMap<f32>], path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    for t in ts {
        encode_tensor(t, &mut buf)?;
    }
    fs::write(path, buf)?;
    Ok(())
}

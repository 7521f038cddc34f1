use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SDID";
const HEADER_LEN: usize = 16;

/// Row-major z-depth image with an explicit validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthGrid {
    width: usize,
    height: usize,
    values: Vec<f32>,
    valid: Vec<bool>,
}

impl DepthGrid {
    pub fn new(width: usize, height: usize, values: Vec<f32>, valid: Vec<bool>) -> Result<Self> {
        let n = width * height;
        if values.len() != n {
            return Err(Error::Shape { expected: n, got: values.len() });
        }
        if valid.len() != n {
            return Err(Error::Shape { expected: n, got: valid.len() });
        }
        if let Some(i) = (0..n).find(|&i| valid[i] && !(values[i].is_finite() && values[i] > 0.0)) {
            return Err(Error::InvalidDepth(values[i] as f64));
        }
        Ok(Self { width, height, values, valid })
    }

    /// Builds a grid where non-finite or non-positive values are invalid.
    pub fn from_values(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        let valid = values.iter().map(|z| z.is_finite() && *z > 0.0).collect();
        Self::new(width, height, values, valid)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Depth at `(u, v)` if that pixel is valid.
    pub fn get(&self, u: usize, v: usize) -> Option<f32> {
        if u >= self.width || v >= self.height {
            return None;
        }
        let i = v * self.width + u;
        self.valid[i].then_some(self.values[i])
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn invalidate(&mut self, u: usize, v: usize) {
        if u < self.width && v < self.height {
            self.valid[v * self.width + u] = false;
        }
    }

    /// Encodes as `SDID` header (magic, width, height, flags) followed by
    /// little-endian f32 depths; invalid pixels are written as NaN.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        for (z, ok) in self.values.iter().zip(&self.valid) {
            let z = if *ok { *z } else { f32::NAN };
            out.extend_from_slice(&z.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(Error::format("depth", "missing SDID header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let (width, height, _flags) = (word(4), word(8), word(12));
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Error::format("depth", "image dimensions overflow"))?;
        if bytes.len() != HEADER_LEN + 4 * n {
            return Err(Error::format(
                "depth",
                format!("payload is {} bytes, header declares {}x{}", bytes.len() - HEADER_LEN, width, height),
            ));
        }
        let values: Vec<f32> = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        // NaN marks invalid; anything else non-positive is also unusable.
        Self::from_values(width, height, values)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

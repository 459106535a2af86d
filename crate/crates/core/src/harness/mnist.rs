//! IDX files: `u8` image tensors (magic `0x00000803`) binarized at half
//! intensity, and label vectors (magic `0x00000801`).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::BitState;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Largest payload accepted, in bytes.
const MAX_PAYLOAD: u64 = 1 << 32;

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    let chunk = bytes.get(at..at + 4).ok_or(Error::Truncated {
        expected: at + 4,
        found: bytes.len(),
    })?;
    Ok(u32::from_be_bytes(chunk.try_into().expect("four bytes")))
}

fn header(bytes: &[u8], magic: u32) -> Result<(Vec<u32>, usize)> {
    let found = read_u32(bytes, 0)?;
    if found != magic {
        return Err(Error::BadMagic { expected: magic, found });
    }
    let ndims = (magic & 0xff) as usize;
    let dims = (0..ndims)
        .map(|k| read_u32(bytes, 4 + 4 * k))
        .collect::<Result<Vec<u32>>>()?;
    let payload = dims
        .iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
        .filter(|&p| p <= MAX_PAYLOAD)
        .ok_or_else(|| Error::DimensionOverflow(dims.clone()))?;
    let start = 4 + 4 * ndims;
    let expected = start + payload as usize;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    Ok((dims, start))
}

/// Binarized images from an in-memory IDX image file; a pixel becomes 1
/// when `value / 255 > 0.5`.
pub fn parse_mnist_idx(bytes: &[u8]) -> Result<Vec<BitState>> {
    let (dims, start) = header(bytes, IMAGE_MAGIC)?;
    let count = dims[0] as usize;
    let pixels = dims[1] as usize * dims[2] as usize;
    let data = &bytes[start..start + count * pixels];
    data.chunks_exact(pixels.max(1))
        .take(count)
        .map(|img| BitState::from_bits(img.iter().map(|&v| u8::from(v as f64 / 255.0 > 0.5)).collect()))
        .collect()
}

pub fn load_mnist_idx(path: impl AsRef<Path>) -> Result<Vec<BitState>> {
    parse_mnist_idx(&fs::read(path)?)
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let (dims, start) = header(bytes, LABEL_MAGIC)?;
    Ok(bytes[start..start + dims[0] as usize].to_vec())
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    parse_idx_labels(&fs::read(path)?)
}

/// Encodes `u8` images as an IDX image file.
pub fn encode_idx_images(images: &[Vec<u8>], rows: u32, cols: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * (rows * cols) as usize);
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&rows.to_be_bytes());
    out.extend_from_slice(&cols.to_be_bytes());
    for img in images {
        out.extend_from_slice(img);
    }
    out
}

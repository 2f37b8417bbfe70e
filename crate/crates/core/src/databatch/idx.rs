//! IDX files: a big-endian `u32` magic, one big-endian `u32` per dimension,
//! then unsigned bytes.

use std::path::Path;

use super::batch::{Batch, BatchSource};
use crate::error::{Error, Result};
use crate::specmat::RealMatrix;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Truncated { what: what.to_string(), expected: offset + 4, found: bytes.len() })
}

/// Parses an IDX payload with the given magic and returns its dimensions and
/// the byte payload.
pub fn parse_idx<'a>(bytes: &'a [u8], magic: u32, what: &str) -> Result<(Vec<usize>, &'a [u8])> {
    let found = be_u32(bytes, 0, what)?;
    if found != magic {
        return Err(Error::BadMagic { what: what.to_string(), expected: magic, found });
    }
    let ndim = (magic & 0xff) as usize;
    let dims = (0..ndim).map(|i| be_u32(bytes, 4 + 4 * i, what).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let header = 4 + 4 * ndim;
    let len: usize = dims.iter().product();
    if bytes.len() < header + len {
        return Err(Error::Truncated { what: what.to_string(), expected: header + len, found: bytes.len() });
    }
    Ok((dims, &bytes[header..header + len]))
}

/// Loads an image/label file pair. Pixels are scaled to `[0, 1]`; each image
/// becomes one column.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Batch> {
    let images = std::fs::read(images_path)?;
    let labels = std::fs::read(labels_path)?;
    let batch = idx_from_bytes(&images, &labels)?;
    Ok(Batch { source: BatchSource::File { path: images_path.display().to_string() }, ..batch })
}

pub fn idx_from_bytes(images: &[u8], labels: &[u8]) -> Result<Batch> {
    let (idims, pixels) = parse_idx(images, IDX_IMAGES_MAGIC, "image file")?;
    let (ldims, label_bytes) = parse_idx(labels, IDX_LABELS_MAGIC, "label file")?;
    let (n, features) = (idims[0], idims[1] * idims[2]);
    if ldims[0] != n {
        return Err(Error::Shape(format!("{n} images but {} labels", ldims[0])));
    }
    let mut data = RealMatrix::zeros(features, n);
    for (j, image) in pixels.chunks_exact(features.max(1)).enumerate().take(n) {
        for (i, &p) in image.iter().enumerate() {
            data[(i, j)] = f64::from(p) / 255.0;
        }
    }
    let labels = label_bytes.iter().map(|&b| usize::from(b)).collect();
    Batch::new(data, labels, BatchSource::File { path: String::new() })
}

/// Encodes `n` images of `rows x cols` bytes and their labels as IDX files.
pub fn idx_to_bytes(pixels: &[u8], n: usize, rows: usize, cols: usize, labels: &[u8]) -> Result<(Vec<u8>, Vec<u8>)> {
    if pixels.len() != n * rows * cols || labels.len() != n {
        return Err(Error::Shape(format!(
            "{n} images of {rows}x{cols} need {} pixels and {n} labels",
            n * rows * cols
        )));
    }
    let mut img = Vec::with_capacity(16 + pixels.len());
    img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    for dim in [n, rows, cols] {
        img.extend_from_slice(&(dim as u32).to_be_bytes());
    }
    img.extend_from_slice(pixels);
    let mut lab = Vec::with_capacity(8 + n);
    lab.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(n as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    Ok((img, lab))
}

pub fn write_idx(
    images_path: &Path,
    labels_path: &Path,
    pixels: &[u8],
    n: usize,
    rows: usize,
    cols: usize,
    labels: &[u8],
) -> Result<()> {
    let (img, lab) = idx_to_bytes(pixels, n, rows, cols, labels)?;
    std::fs::write(images_path, img)?;
    std::fs::write(labels_path, lab)?;
    Ok(())
}

//! IDX files as distributed with MNIST: big-endian `u32` magic
//! (`0x00000803` images, `0x00000801` labels), big-endian `u32` dimension
//! sizes, then unsigned bytes.

use std::fs;
use std::path::Path;

use super::{Dataset, NetError};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_file(path: &Path) -> Result<Vec<u8>, NetError> {
    fs::read(path).map_err(|source| NetError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn be_u32(bytes: &[u8], at: usize, section: &str) -> Result<u32, NetError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| NetError::Truncated {
            section: section.into(),
        })
}

fn check_magic(found: u32, expected: u32) -> Result<(), NetError> {
    if found != expected {
        return Err(NetError::BadMagic {
            expected: format!("{expected:#010x}"),
            found: format!("{found:#010x}"),
        });
    }
    Ok(())
}

/// Parses an images file into row-major pixel vectors in `[0, 255]`.
pub fn read_idx_images(bytes: &[u8]) -> Result<(Vec<Vec<f64>>, usize, usize), NetError> {
    check_magic(be_u32(bytes, 0, "idx header")?, IMAGES_MAGIC)?;
    let count = be_u32(bytes, 4, "idx header")? as usize;
    let rows = be_u32(bytes, 8, "idx header")? as usize;
    let cols = be_u32(bytes, 12, "idx header")? as usize;
    let size = rows * cols;
    let body = &bytes[16..];
    if body.len() < count * size {
        return Err(NetError::Truncated {
            section: format!("idx image data ({} of {} bytes)", body.len(), count * size),
        });
    }
    let images = body
        .chunks_exact(size.max(1))
        .take(count)
        .map(|px| px.iter().map(|&b| f64::from(b)).collect())
        .collect();
    Ok((images, rows, cols))
}

pub fn read_idx_labels(bytes: &[u8]) -> Result<Vec<usize>, NetError> {
    check_magic(be_u32(bytes, 0, "idx header")?, LABELS_MAGIC)?;
    let count = be_u32(bytes, 4, "idx header")? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(NetError::Truncated {
            section: format!("idx label data ({} of {count} bytes)", body.len()),
        });
    }
    Ok(body[..count].iter().map(|&b| usize::from(b)).collect())
}

/// Loads an image/label pair as a dataset with feature range `[0, 255]`.
///
/// The class count is `max(label) + 1`, but at least 2.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset, NetError> {
    let (images, _, _) = read_idx_images(&read_file(images_path)?)?;
    let labels = read_idx_labels(&read_file(labels_path)?)?;
    if images.len() != labels.len() {
        return Err(NetError::CountMismatch {
            images: images.len(),
            labels: labels.len(),
        });
    }
    let classes = labels.iter().max().map_or(2, |m| (m + 1).max(2));
    Dataset::new(images, labels, classes, (0.0, 255.0))
}

pub fn write_idx_images(images: &[Vec<u8>], rows: usize, cols: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    for img in images {
        assert_eq!(img.len(), rows * cols, "image size");
        out.extend_from_slice(img);
    }
    out
}

pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

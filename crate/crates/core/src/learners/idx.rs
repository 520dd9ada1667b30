//! MNIST IDX files: big-endian magic `0x00000803` (images) or `0x00000801`
//! (labels), one u32 per dimension, then raw unsigned bytes.

use std::path::Path;

use super::LabeledSample;
use crate::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    /// Pixels scaled to `[0, 1]`, one row-major vector per image.
    pub images: Vec<Vec<f64>>,
}

fn header(bytes: &[u8], magic: u32, dims: usize) -> Result<Vec<usize>> {
    let need = 4 * (dims + 1);
    if bytes.len() < need {
        return Err(Error::Format("truncated IDX header".into()));
    }
    let word = |i: usize| u32::from_be_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
    if word(0) != magic {
        return Err(Error::Format(format!(
            "IDX magic {:#010x}, expected {magic:#010x}",
            word(0)
        )));
    }
    Ok((1..=dims).map(|i| word(i) as usize).collect())
}

pub fn read_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let d = header(bytes, IMAGES_MAGIC, 3)?;
    let (count, rows, cols) = (d[0], d[1], d[2]);
    let pixels = rows * cols;
    let body = &bytes[16..];
    if body.len() != count * pixels {
        return Err(Error::Format(format!(
            "IDX image body has {} bytes, expected {}",
            body.len(),
            count * pixels
        )));
    }
    let images = body
        .chunks_exact(pixels.max(1))
        .take(count)
        .map(|c| c.iter().map(|&p| p as f64 / 255.0).collect())
        .collect();
    Ok(IdxImages { rows, cols, images })
}

pub fn read_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let d = header(bytes, LABELS_MAGIC, 1)?;
    let body = &bytes[8..];
    if body.len() != d[0] {
        return Err(Error::Format(format!(
            "IDX label body has {} bytes, expected {}",
            body.len(),
            d[0]
        )));
    }
    Ok(body.to_vec())
}

pub fn load_mnist(images: &Path, labels: &Path) -> Result<Vec<LabeledSample>> {
    let imgs = read_idx_images(&std::fs::read(images)?)?;
    let labs = read_idx_labels(&std::fs::read(labels)?)?;
    if imgs.images.len() != labs.len() {
        return Err(Error::Format(format!(
            "{} images but {} labels",
            imgs.images.len(),
            labs.len()
        )));
    }
    Ok(imgs
        .images
        .into_iter()
        .zip(labs)
        .map(|(x, l)| LabeledSample::new(x, l as usize))
        .collect())
}

/// Keeps only classes `negative` and `positive`, relabelled 0 and 1.
pub fn mnist_binary(samples: Vec<LabeledSample>, negative: usize, positive: usize) -> Vec<LabeledSample> {
    samples
        .into_iter()
        .filter_map(|mut s| {
            s.label = match s.label {
                l if l == negative => 0,
                l if l == positive => 1,
                _ => return None,
            };
            Some(s)
        })
        .collect()
}

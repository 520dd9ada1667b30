//! Building codebook bundles for a given gradient dimension.

use std::path::Path;

use crate::codebooks::{
    line_packing, lloyd_codebook, uniform_scalar_codebook, CodebookBundle, LLOYD_DEFAULT_ITERS, LLOYD_DEFAULT_TOL,
    PACKING_DEFAULT_ITERS, PACKING_DEFAULT_TOL,
};
use crate::gradquant::block_len;
use crate::rng::{RngStream, StreamTag};
use crate::{Error, Result};

/// Fallback training-set size when no hinge vectors are supplied.
pub const FALLBACK_TRAINING: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundleSpec {
    /// Gradient length.
    pub dim: usize,
    /// Number of blocks `M`.
    pub blocks: usize,
    pub bits_norm: u8,
    pub bits_block: u8,
    pub bits_hinge: u8,
    /// Range of the uniform norm quantizer.
    pub norm_range: (f64, f64),
}

impl BundleSpec {
    pub fn block_len(&self) -> usize {
        block_len(self.dim, self.blocks)
    }

    /// Payload bits per gradient, `B_ρ + M(B_s + 1) + B_h`.
    pub fn payload_bits(&self) -> u64 {
        self.bits_norm as u64 + self.blocks as u64 * (self.bits_block as u64 + 1) + self.bits_hinge as u64
    }

    /// Whether `bundle` has the dimensions and widths this spec asks for.
    pub fn matches(&self, bundle: &CodebookBundle) -> bool {
        bundle.blocks() == self.blocks
            && bundle.block_len() == self.block_len()
            && bundle.norm_cb.bits() == self.bits_norm
            && bundle.block_cb.bits() == self.bits_block
            && bundle.hinge_cb.bits() == self.bits_hinge
    }
}

/// Unit vectors with i.i.d. `|N(0,1)|` entries.
pub fn fallback_hinge_training(m: usize, count: usize, rng: &mut RngStream) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            let mut v: Vec<f64> = (0..m).map(|_| rng.standard_normal().abs()).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= n);
            v
        })
        .collect()
}

/// Hinge vectors from a headerless CSV, one vector per row. Rows are
/// normalized to unit length; negative entries are rejected.
pub fn read_hinge_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let mut v = rec
            .iter()
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| Error::Format(format!("row {}: cannot parse {c:?}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if v.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::Format(format!(
                "row {}: hinge entries must be finite and nonnegative",
                i + 1
            )));
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(Error::Format(format!("row {}: zero vector", i + 1)));
        }
        v.iter_mut().for_each(|x| *x /= n);
        out.push(v);
    }
    Ok(out)
}

/// Norm quantizer, packed block codebook and Lloyd-trained hinge codebook.
/// Without `hinge_training` the hinge codebook is trained on
/// [`fallback_hinge_training`] draws.
pub fn build_bundle(spec: &BundleSpec, hinge_training: Option<&[Vec<f64>]>, seed: u64) -> Result<CodebookBundle> {
    if spec.blocks == 0 || spec.blocks > spec.dim {
        return Err(Error::Config(format!(
            "cannot split dim {} into {} blocks",
            spec.dim, spec.blocks
        )));
    }
    let (lo, hi) = spec.norm_range;
    let norm_cb = uniform_scalar_codebook(lo, hi, spec.bits_norm)?;
    let l = spec.block_len();
    if l < 2 {
        return Err(Error::Config(format!("block length {l} is too short for line packing")));
    }
    let block_cb = line_packing(
        l,
        spec.bits_block,
        &mut RngStream::derive(seed, StreamTag::Codebook, 0, 0),
        PACKING_DEFAULT_ITERS,
        PACKING_DEFAULT_TOL,
    )?;
    let mut rng = RngStream::derive(seed, StreamTag::Codebook, 1, 0);
    let fallback;
    let training = match hinge_training {
        Some(t) => t,
        None => {
            fallback = fallback_hinge_training(spec.blocks, FALLBACK_TRAINING.max(4 << spec.bits_hinge), &mut rng);
            &fallback
        }
    };
    if training.iter().any(|t| t.len() != spec.blocks) {
        return Err(Error::Config(format!(
            "hinge training vectors must have length M = {}",
            spec.blocks
        )));
    }
    let hinge_cb = lloyd_codebook(
        training,
        spec.bits_hinge,
        &mut rng,
        LLOYD_DEFAULT_ITERS,
        LLOYD_DEFAULT_TOL,
    )?;
    CodebookBundle::new(norm_cb, block_cb, hinge_cb)
}

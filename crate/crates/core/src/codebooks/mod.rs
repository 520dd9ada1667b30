//! Quantization codebooks for hierarchical gradient quantization.
//!
//! A [`CodebookBundle`] holds the three codebooks a device and the server
//! must share:
//!
//! - a uniform scalar codebook for the gradient norm,
//! - an isotropic Grassmannian codebook of dimension `L` for normalized
//!   block gradients, built by [`line_packing`],
//! - a nonnegative Grassmannian codebook of dimension `M` for the hinge
//!   vector, trained with [`lloyd_codebook`].

mod io;
mod lloyd;
mod packing;

pub use io::{deserialize_bundle, serialize_bundle, BUNDLE_MAGIC, BUNDLE_VERSION};
pub use lloyd::{lloyd_codebook, LLOYD_DEFAULT_ITERS, LLOYD_DEFAULT_TOL};
pub use packing::{line_packing, pack_lines, welch_bound, PACKING_DEFAULT_ITERS, PACKING_DEFAULT_TOL};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Unit-norm tolerance for stored codewords.
pub const UNIT_NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarCodebook {
    levels: Vec<f64>,
    bits: u8,
}

impl ScalarCodebook {
    pub fn from_levels(levels: Vec<f64>, bits: u8) -> Result<Self> {
        if bits == 0 || bits > 31 || levels.len() != 1usize << bits {
            return Err(Error::invalid(format!(
                "scalar codebook with {} levels for {bits} bits",
                levels.len()
            )));
        }
        if levels.iter().any(|v| !v.is_finite()) || levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("scalar levels must be finite and strictly increasing"));
        }
        Ok(Self { levels, bits })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn level(&self, index: usize) -> Option<f64> {
        self.levels.get(index).copied()
    }

    /// Index of the nearest level; ties go to the lower index.
    pub fn quantize(&self, value: f64) -> usize {
        let pos = self.levels.partition_point(|&l| l < value);
        if pos == 0 {
            return 0;
        }
        if pos == self.levels.len() {
            return pos - 1;
        }
        if value - self.levels[pos - 1] <= self.levels[pos] - value {
            pos - 1
        } else {
            pos
        }
    }
}

/// `2^bits` levels at the cell midpoints of `[lo, hi]`.
pub fn uniform_scalar_codebook(lo: f64, hi: f64, bits: u8) -> Result<ScalarCodebook> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!("scalar range [{lo}, {hi}] is empty")));
    }
    if bits == 0 || bits > 31 {
        return Err(Error::invalid(format!("unsupported bit width {bits}")));
    }
    let count = 1usize << bits;
    let step = (hi - lo) / count as f64;
    let levels = (0..count).map(|j| lo + (j as f64 + 0.5) * step).collect();
    ScalarCodebook::from_levels(levels, bits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodebookKind {
    Isotropic,
    Nonnegative,
}

/// Set of `2^bits` unit-norm real codewords.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannCodebook {
    codewords: Vec<Vec<f64>>,
    bits: u8,
    kind: CodebookKind,
}

impl GrassmannCodebook {
    pub fn new(codewords: Vec<Vec<f64>>, bits: u8, kind: CodebookKind) -> Result<Self> {
        if bits == 0 || bits > 24 || codewords.len() != 1usize << bits {
            return Err(Error::invalid(format!("{} codewords for {bits} bits", codewords.len())));
        }
        let dim = codewords[0].len();
        if dim == 0 {
            return Err(Error::invalid("zero-dimensional codewords"));
        }
        for (i, c) in codewords.iter().enumerate() {
            if c.len() != dim {
                return Err(Error::dims(format!(
                    "codeword {i} has dimension {}, expected {dim}",
                    c.len()
                )));
            }
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !((norm - 1.0).abs() <= UNIT_NORM_TOL) {
                return Err(Error::invalid(format!("codeword {i} has norm {norm}")));
            }
            if kind == CodebookKind::Nonnegative && c.iter().any(|&x| x < 0.0) {
                return Err(Error::invalid(format!("codeword {i} has a negative coefficient")));
            }
        }
        Ok(Self { codewords, bits, kind })
    }

    pub fn codewords(&self) -> &[Vec<f64>] {
        &self.codewords
    }

    pub fn codeword(&self, index: usize) -> Option<&[f64]> {
        self.codewords.get(index).map(Vec::as_slice)
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn kind(&self) -> CodebookKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.codewords[0].len()
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Maximal absolute inner product between distinct codewords.
    pub fn coherence(&self) -> f64 {
        coherence(&self.codewords)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

pub(crate) fn coherence(codewords: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..codewords.len() {
        for j in i + 1..codewords.len() {
            worst = worst.max(dot(&codewords[i], &codewords[j]).abs());
        }
    }
    worst
}

/// The three codebooks shared by devices and the server.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookBundle {
    pub norm_cb: ScalarCodebook,
    /// Dimension `L`, isotropic.
    pub block_cb: GrassmannCodebook,
    /// Dimension `M`, nonnegative.
    pub hinge_cb: GrassmannCodebook,
}

impl CodebookBundle {
    pub fn new(norm_cb: ScalarCodebook, block_cb: GrassmannCodebook, hinge_cb: GrassmannCodebook) -> Result<Self> {
        if block_cb.kind() != CodebookKind::Isotropic {
            return Err(Error::invalid("block codebook must be isotropic"));
        }
        if hinge_cb.kind() != CodebookKind::Nonnegative {
            return Err(Error::invalid("hinge codebook must be nonnegative"));
        }
        Ok(Self {
            norm_cb,
            block_cb,
            hinge_cb,
        })
    }

    /// Number of blocks `M`.
    pub fn blocks(&self) -> usize {
        self.hinge_cb.dim()
    }

    /// Block length `L`.
    pub fn block_len(&self) -> usize {
        self.block_cb.dim()
    }
}

//! Hierarchical stochastic-gradient quantization and the signSGD baseline.
//!
//! A gradient `g` (zero-padded to `M·L`) is written as
//!
//! ```text
//! g = ρ · [h_1 s_1; h_2 s_2; …; h_M s_M]
//! ```
//!
//! with `ρ = ‖g‖`, unit block directions `s_i` and the unit, nonnegative
//! hinge vector `h`. Each factor is quantized with its own codebook from a
//! [`CodebookBundle`]; block directions carry an extra sign bit because the
//! block codebook only stores lines.

mod signsgd;
mod wire;

pub use signsgd::{signsgd_dequantize, signsgd_quantize, SignCode};
pub use wire::{decode_code, encode_code, WIRE_HEADER_LEN};

use crate::codebooks::{dot, CodebookBundle};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradientDecomposition {
    pub rho: f64,
    /// `M` unit vectors of length `L`.
    pub block_dirs: Vec<Vec<f64>>,
    /// Unit norm, nonnegative, length `M`.
    pub hinge: Vec<f64>,
    /// Original (unpadded) gradient length.
    pub dim: usize,
}

impl GradientDecomposition {
    pub fn blocks(&self) -> usize {
        self.hinge.len()
    }

    pub fn block_len(&self) -> usize {
        self.block_dirs.first().map_or(0, Vec::len)
    }

    /// `ρ · Σ_i h_i s_i` placed block by block, padding removed.
    pub fn reassemble(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .block_dirs
            .iter()
            .zip(&self.hinge)
            .flat_map(|(s, &h)| s.iter().map(move |v| self.rho * h * v))
            .collect();
        out.truncate(self.dim);
        out
    }
}

fn check_finite(g: &[f64]) -> Result<()> {
    if g.is_empty() {
        return Err(Error::invalid("empty gradient"));
    }
    if g.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid("gradient has non-finite coefficients"))
    }
}

/// Block length for splitting `dim` coefficients into `m` blocks.
pub fn block_len(dim: usize, m: usize) -> usize {
    dim.div_ceil(m)
}

pub fn decompose(g: &[f64], m: usize) -> Result<GradientDecomposition> {
    check_finite(g)?;
    if m == 0 || m > g.len() {
        return Err(Error::invalid(format!(
            "cannot split {} coefficients into {m} blocks",
            g.len()
        )));
    }
    let l = block_len(g.len(), m);
    let rho = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut block_dirs = Vec::with_capacity(m);
    let mut hinge = Vec::with_capacity(m);
    for i in 0..m {
        let mut block = vec![0.0; l];
        for (j, b) in block.iter_mut().enumerate() {
            if let Some(&v) = g.get(i * l + j) {
                *b = v;
            }
        }
        let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 && rho > 0.0 {
            block.iter_mut().for_each(|v| *v /= norm);
            hinge.push(norm / rho);
        } else {
            block.iter_mut().for_each(|v| *v = 0.0);
            block[0] = 1.0;
            hinge.push(0.0);
        }
        block_dirs.push(block);
    }
    if rho == 0.0 {
        hinge[0] = 1.0;
    } else {
        // ‖f‖ = 1 up to rounding; renormalise so Σ h_i² = 1 holds tightly
        let hn = hinge.iter().map(|v| v * v).sum::<f64>().sqrt();
        hinge.iter_mut().for_each(|v| *v /= hn);
    }
    Ok(GradientDecomposition {
        rho,
        block_dirs,
        hinge,
        dim: g.len(),
    })
}

/// Bit widths of a hierarchical code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeWidths {
    pub norm: u8,
    pub block: u8,
    pub hinge: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockIndex {
    pub index: u32,
    pub negative: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HierarchicalCode {
    pub dim: u32,
    pub widths: CodeWidths,
    pub norm_index: u32,
    pub blocks: Vec<BlockIndex>,
    pub hinge_index: u32,
}

impl HierarchicalCode {
    /// `B_ρ + M·(B_s + 1) + B_h`.
    pub fn payload_bits(&self) -> u64 {
        let w = self.widths;
        w.norm as u64 + self.blocks.len() as u64 * (w.block as u64 + 1) + w.hinge as u64
    }

    pub fn validate(&self) -> Result<()> {
        let fits = |v: u32, bits: u8| bits >= 32 || (v as u64) < (1u64 << bits);
        if !fits(self.norm_index, self.widths.norm)
            || !fits(self.hinge_index, self.widths.hinge)
            || self.blocks.iter().any(|b| !fits(b.index, self.widths.block))
        {
            return Err(Error::Format("code index exceeds its bit width".into()));
        }
        Ok(())
    }
}

/// Anything that can report its transmitted payload size.
pub trait Payload {
    fn payload_bits(&self) -> u64;
    /// Number of gradient coefficients the payload describes.
    fn coefficients(&self) -> usize;
}

impl Payload for HierarchicalCode {
    fn payload_bits(&self) -> u64 {
        HierarchicalCode::payload_bits(self)
    }

    fn coefficients(&self) -> usize {
        self.dim as usize
    }
}

pub fn bits_per_coefficient(code: &impl Payload) -> f64 {
    code.payload_bits() as f64 / code.coefficients() as f64
}

fn check_bundle(bundle: &CodebookBundle, dim: usize) -> Result<()> {
    let (m, l) = (bundle.blocks(), bundle.block_len());
    if m == 0 || m > dim || block_len(dim, m) != l {
        return Err(Error::dims(format!(
            "gradient of length {dim} does not split into M={m} blocks of L={l}"
        )));
    }
    Ok(())
}

/// Best codeword index and sign for a unit block direction; ties go to the
/// lowest index with a positive sign.
pub(crate) fn nearest_signed(s: &[f64], codewords: &[Vec<f64>]) -> BlockIndex {
    let mut best = 0;
    let mut best_abs = f64::NEG_INFINITY;
    let mut best_ip = 0.0;
    for (i, c) in codewords.iter().enumerate() {
        let ip = dot(s, c);
        if ip.abs() > best_abs {
            best_abs = ip.abs();
            best_ip = ip;
            best = i;
        }
    }
    BlockIndex {
        index: best as u32,
        negative: best_ip < 0.0,
    }
}

fn nearest_unsigned(h: &[f64], codewords: &[Vec<f64>]) -> u32 {
    let mut best = 0;
    let mut best_ip = f64::NEG_INFINITY;
    for (i, c) in codewords.iter().enumerate() {
        let ip = dot(h, c);
        if ip > best_ip {
            best_ip = ip;
            best = i;
        }
    }
    best as u32
}

pub fn quantize(g: &[f64], bundle: &CodebookBundle) -> Result<HierarchicalCode> {
    check_finite(g)?;
    check_bundle(bundle, g.len())?;
    let dec = decompose(g, bundle.blocks())?;
    let blocks = dec
        .block_dirs
        .iter()
        .map(|s| nearest_signed(s, bundle.block_cb.codewords()))
        .collect();
    Ok(HierarchicalCode {
        dim: g.len() as u32,
        widths: CodeWidths {
            norm: bundle.norm_cb.bits(),
            block: bundle.block_cb.bits(),
            hinge: bundle.hinge_cb.bits(),
        },
        norm_index: bundle.norm_cb.quantize(dec.rho) as u32,
        blocks,
        hinge_index: nearest_unsigned(&dec.hinge, bundle.hinge_cb.codewords()),
    })
}

/// Table-lookup reconstruction `ρ̂ · Σ_i ĥ_i · sign_i · ŝ_i`.
pub fn dequantize(code: &HierarchicalCode, bundle: &CodebookBundle) -> Result<Vec<f64>> {
    let w = code.widths;
    if w.norm != bundle.norm_cb.bits()
        || w.block != bundle.block_cb.bits()
        || w.hinge != bundle.hinge_cb.bits()
        || code.blocks.len() != bundle.blocks()
    {
        return Err(Error::dims(format!(
            "code widths ({}, {}, {}) x M={} do not match the bundle",
            w.norm,
            w.block,
            w.hinge,
            code.blocks.len()
        )));
    }
    let dim = code.dim as usize;
    check_bundle(bundle, dim)?;
    let out_of_range = |what: &str, i: u32| Error::Format(format!("{what} index {i} out of range"));
    let rho = bundle
        .norm_cb
        .level(code.norm_index as usize)
        .ok_or_else(|| out_of_range("norm", code.norm_index))?;
    let hinge = bundle
        .hinge_cb
        .codeword(code.hinge_index as usize)
        .ok_or_else(|| out_of_range("hinge", code.hinge_index))?;
    let mut out = Vec::with_capacity(bundle.blocks() * bundle.block_len());
    for (b, &h) in code.blocks.iter().zip(hinge) {
        let s = bundle
            .block_cb
            .codeword(b.index as usize)
            .ok_or_else(|| out_of_range("block", b.index))?;
        let scale = rho * h * if b.negative { -1.0 } else { 1.0 };
        out.extend(s.iter().map(|v| scale * v));
    }
    out.truncate(dim);
    Ok(out)
}

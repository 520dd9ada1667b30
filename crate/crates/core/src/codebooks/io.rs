//! Binary codebook bundle files.
//!
//! Layout (all little-endian):
//!
//! ```text
//! magic    "ECLB"                     4 bytes
//! version  u16                        2 bytes
//! kinds    u8 × 3 (norm, block, hinge) 3 bytes   0 = scalar, 1 = isotropic, 2 = nonnegative
//! M, L     u32 × 2                    8 bytes
//! bits     u8 × 3 (B_ρ, B_s, B_h)     3 bytes
//! levels   f64 × 2^B_ρ
//! block    f64 × 2^B_s × L            codeword-major
//! hinge    f64 × 2^B_h × M            codeword-major
//! ```

use super::{CodebookBundle, CodebookKind, GrassmannCodebook, ScalarCodebook};
use crate::{Error, Result};

pub const BUNDLE_MAGIC: &[u8; 4] = b"ECLB";
pub const BUNDLE_VERSION: u16 = 1;

const KIND_SCALAR: u8 = 0;
const KIND_ISOTROPIC: u8 = 1;
const KIND_NONNEGATIVE: u8 = 2;
const HEADER_LEN: usize = 4 + 2 + 3 + 8 + 3;

fn kind_tag(kind: CodebookKind) -> u8 {
    match kind {
        CodebookKind::Isotropic => KIND_ISOTROPIC,
        CodebookKind::Nonnegative => KIND_NONNEGATIVE,
    }
}

pub fn serialize_bundle(bundle: &CodebookBundle) -> Vec<u8> {
    let mut out = Vec::with_capacity(
        HEADER_LEN
            + 8 * (bundle.norm_cb.levels().len()
                + bundle.block_cb.len() * bundle.block_len()
                + bundle.hinge_cb.len() * bundle.blocks()),
    );
    out.extend_from_slice(BUNDLE_MAGIC);
    out.extend_from_slice(&BUNDLE_VERSION.to_le_bytes());
    out.extend_from_slice(&[
        KIND_SCALAR,
        kind_tag(bundle.block_cb.kind()),
        kind_tag(bundle.hinge_cb.kind()),
    ]);
    out.extend_from_slice(&(bundle.blocks() as u32).to_le_bytes());
    out.extend_from_slice(&(bundle.block_len() as u32).to_le_bytes());
    out.extend_from_slice(&[bundle.norm_cb.bits(), bundle.block_cb.bits(), bundle.hinge_cb.bits()]);
    for v in bundle.norm_cb.levels() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for cb in [&bundle.block_cb, &bundle.hinge_cb] {
        for c in cb.codewords() {
            for v in c {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Format(format!(
                    "truncated bundle: need {n} bytes at offset {}, have {}",
                    self.pos,
                    self.bytes.len() - self.pos
                ))
            })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn codewords(reader: &mut Reader<'_>, bits: u8, dim: usize) -> Result<Vec<Vec<f64>>> {
    if bits == 0 || bits > 24 {
        return Err(Error::Format(format!("unsupported codebook bit width {bits}")));
    }
    let count = 1usize << bits;
    let flat = reader.f64s(count * dim)?;
    Ok(flat.chunks_exact(dim).map(<[f64]>::to_vec).collect())
}

fn as_format(e: Error) -> Error {
    match e {
        Error::Format(_) => e,
        other => Error::Format(other.to_string()),
    }
}

pub fn deserialize_bundle(bytes: &[u8]) -> Result<CodebookBundle> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != BUNDLE_MAGIC {
        return Err(Error::Format("bad magic, not a codebook bundle".into()));
    }
    let version = r.u16()?;
    if version != BUNDLE_VERSION {
        return Err(Error::Format(format!(
            "unsupported bundle version {version} (expected {BUNDLE_VERSION})"
        )));
    }
    let kinds = [r.u8()?, r.u8()?, r.u8()?];
    if kinds != [KIND_SCALAR, KIND_ISOTROPIC, KIND_NONNEGATIVE] {
        return Err(Error::Format(format!("unexpected kind tags {kinds:?}")));
    }
    let m = r.u32()? as usize;
    let l = r.u32()? as usize;
    if m == 0 || l == 0 {
        return Err(Error::Format(format!("invalid dimensions M={m}, L={l}")));
    }
    let (b_rho, b_s, b_h) = (r.u8()?, r.u8()?, r.u8()?);
    if b_rho == 0 || b_rho > 31 {
        return Err(Error::Format(format!("unsupported norm bit width {b_rho}")));
    }
    let levels = r.f64s(1usize << b_rho)?;
    let block = codewords(&mut r, b_s, l)?;
    let hinge = codewords(&mut r, b_h, m)?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after bundle",
            bytes.len() - r.pos
        )));
    }
    let norm_cb = ScalarCodebook::from_levels(levels, b_rho).map_err(as_format)?;
    let block_cb = GrassmannCodebook::new(block, b_s, CodebookKind::Isotropic).map_err(as_format)?;
    let hinge_cb = GrassmannCodebook::new(hinge, b_h, CodebookKind::Nonnegative).map_err(as_format)?;
    CodebookBundle::new(norm_cb, block_cb, hinge_cb).map_err(as_format)
}

//! Bit-exact wire format for [`HierarchicalCode`].
//!
//! A 16-byte big-endian header (`dim` u32, `M` u32, `B_ρ`, `B_s`, `B_h` as
//! u8, five zero bytes) is followed by a packed MSB-first bit stream holding
//! the norm index, then index and sign for every block, then the hinge index.
//! The final byte is zero-padded.

use super::{BlockIndex, CodeWidths, HierarchicalCode};
use crate::{Error, Result};

pub const WIRE_HEADER_LEN: usize = 16;

#[derive(Default)]
struct BitWriter {
    bytes: Vec<u8>,
    used: u32,
}

impl BitWriter {
    fn push(&mut self, value: u32, width: u8) {
        for k in (0..width as u32).rev() {
            if self.used.is_multiple_of(8) {
                self.bytes.push(0);
            }
            let bit = ((value >> k) & 1) as u8;
            *self.bytes.last_mut().unwrap() |= bit << (7 - self.used % 8);
            self.used += 1;
        }
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl BitReader<'_> {
    fn pull(&mut self, width: u8) -> Result<u32> {
        let mut out = 0u32;
        for _ in 0..width {
            let byte = self
                .bytes
                .get(self.pos / 8)
                .ok_or_else(|| Error::Format("truncated code payload".into()))?;
            out = (out << 1) | ((byte >> (7 - self.pos % 8)) & 1) as u32;
            self.pos += 1;
        }
        Ok(out)
    }
}

pub fn encode_code(code: &HierarchicalCode) -> Result<Vec<u8>> {
    code.validate()?;
    let w = code.widths;
    let mut out = Vec::with_capacity(WIRE_HEADER_LEN + code.payload_bits().div_ceil(8) as usize);
    out.extend_from_slice(&code.dim.to_be_bytes());
    out.extend_from_slice(&(code.blocks.len() as u32).to_be_bytes());
    out.extend_from_slice(&[w.norm, w.block, w.hinge, 0, 0, 0, 0, 0]);
    let mut bits = BitWriter::default();
    bits.push(code.norm_index, w.norm);
    for b in &code.blocks {
        bits.push(b.index, w.block);
        bits.push(b.negative as u32, 1);
    }
    bits.push(code.hinge_index, w.hinge);
    out.extend_from_slice(&bits.bytes);
    Ok(out)
}

pub fn decode_code(bytes: &[u8]) -> Result<HierarchicalCode> {
    if bytes.len() < WIRE_HEADER_LEN {
        return Err(Error::Format(format!(
            "code header needs {WIRE_HEADER_LEN} bytes, got {}",
            bytes.len()
        )));
    }
    let dim = u32::from_be_bytes(bytes[0..4].try_into().unwrap());
    let m = u32::from_be_bytes(bytes[4..8].try_into().unwrap());
    let widths = CodeWidths {
        norm: bytes[8],
        block: bytes[9],
        hinge: bytes[10],
    };
    if bytes[11..16].iter().any(|&b| b != 0) {
        return Err(Error::Format("nonzero reserved header bytes".into()));
    }
    if dim == 0 || m == 0 || m > dim {
        return Err(Error::Format(format!("invalid code dims dim={dim}, M={m}")));
    }
    if [widths.norm, widths.block, widths.hinge]
        .iter()
        .any(|&b| b == 0 || b > 32)
    {
        return Err(Error::Format("code bit widths must be in 1..=32".into()));
    }
    let payload_bits = widths.norm as u64 + m as u64 * (widths.block as u64 + 1) + widths.hinge as u64;
    let expected = WIRE_HEADER_LEN as u64 + payload_bits.div_ceil(8);
    if bytes.len() as u64 != expected {
        return Err(Error::Format(format!(
            "code has {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let mut r = BitReader {
        bytes: &bytes[WIRE_HEADER_LEN..],
        pos: 0,
    };
    let norm_index = r.pull(widths.norm)?;
    let mut blocks = Vec::with_capacity(m as usize);
    for _ in 0..m {
        let index = r.pull(widths.block)?;
        let negative = r.pull(1)? == 1;
        blocks.push(BlockIndex { index, negative });
    }
    let hinge_index = r.pull(widths.hinge)?;
    if r.pull(((8 - payload_bits % 8) % 8) as u8)? != 0 {
        return Err(Error::Format("nonzero padding bits".into()));
    }
    Ok(HierarchicalCode {
        dim,
        widths,
        norm_index,
        blocks,
        hinge_index,
    })
}

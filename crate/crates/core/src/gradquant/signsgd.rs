use super::Payload;

/// One sign bit per coefficient. `scale` is carried for diagnostics only and
/// never counted in the payload.
#[derive(Debug, Clone, PartialEq)]
pub struct SignCode {
    /// `true` for a negative coefficient.
    pub negative: Vec<bool>,
    pub scale: Option<f64>,
}

impl Payload for SignCode {
    fn payload_bits(&self) -> u64 {
        self.negative.len() as u64
    }

    fn coefficients(&self) -> usize {
        self.negative.len()
    }
}

/// `sign(g)` with `sign(0) = +1`.
pub fn signsgd_quantize(g: &[f64]) -> SignCode {
    SignCode {
        negative: g.iter().map(|&v| v < 0.0).collect(),
        scale: None,
    }
}

pub fn signsgd_dequantize(code: &SignCode) -> Vec<f64> {
    code.negative.iter().map(|&n| if n { -1.0 } else { 1.0 }).collect()
}

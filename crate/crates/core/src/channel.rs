//! Wireless channel and noise models.
//!
//! Channels are block-fading: a new realisation is drawn for every
//! communication round. All entries are circularly-symmetric complex
//! Gaussian with unit variance (Rayleigh fading).

use serde::{Deserialize, Serialize};

use crate::linalg::{ComplexMatrix, ComplexVector};
use crate::rng::RngStream;
use crate::{Error, Result};

/// `M_r × M_t` MIMO channel of one device.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoChannel {
    pub h: ComplexMatrix,
    pub device_id: usize,
}

impl MimoChannel {
    pub fn new(h: ComplexMatrix, device_id: usize) -> Result<Self> {
        crate::linalg::check_finite(&h)?;
        if h.nrows() == 0 || h.ncols() == 0 {
            return Err(Error::invalid("empty channel matrix"));
        }
        Ok(Self { h, device_id })
    }

    pub fn rx_antennas(&self) -> usize {
        self.h.nrows()
    }

    pub fn tx_antennas(&self) -> usize {
        self.h.ncols()
    }
}

/// Scalar link quality of one device in one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarLink {
    pub snr_linear: f64,
    pub device_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fading {
    #[default]
    Rayleigh,
    /// `|h|² = 1`: the link SNR equals its mean.
    None,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn sample_rayleigh_mimo(m_r: usize, m_t: usize, device_id: usize, rng: &mut RngStream) -> Result<MimoChannel> {
    if m_r == 0 || m_t == 0 {
        return Err(Error::invalid(format!(
            "channel dimensions must be positive, got {m_r}x{m_t}"
        )));
    }
    let h = ComplexMatrix::from_fn(m_r, m_t, |_, _| rng.complex_normal());
    Ok(MimoChannel { h, device_id })
}

/// `snr = 10^(mean_db/10) · |h|²` with `h ~ CN(0, 1)` under Rayleigh fading.
pub fn sample_scalar_link(mean_snr_db: f64, fading: Fading, rng: &mut RngStream, device_id: usize) -> ScalarLink {
    let mean = db_to_linear(mean_snr_db);
    let gain = match fading {
        Fading::None => 1.0,
        Fading::Rayleigh => loop {
            let g = rng.complex_normal().norm_sqr();
            if g > 0.0 {
                break g;
            }
        },
    };
    ScalarLink {
        snr_linear: mean * gain,
        device_id,
    }
}

/// Adds i.i.d. `CN(0, noise_variance)` noise to every entry.
pub fn awgn(signal: &ComplexVector, noise_variance: f64, rng: &mut RngStream) -> Result<ComplexVector> {
    if !(noise_variance >= 0.0) || !noise_variance.is_finite() {
        return Err(Error::invalid(format!(
            "noise variance must be finite and nonnegative, got {noise_variance}"
        )));
    }
    if noise_variance == 0.0 {
        return Ok(signal.clone());
    }
    let std = noise_variance.sqrt();
    Ok(signal.map(|s| s + rng.complex_normal() * std))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    const DRAWS: usize = 100_000;

    #[test]
    fn mimo_unit_variance() {
        let mut rng = RngStream::new(1, 0);
        let mut acc = 0.0;
        let per = 4 * 3;
        for _ in 0..DRAWS / per {
            let ch = sample_rayleigh_mimo(4, 3, 0, &mut rng).unwrap();
            acc += ch.h.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let mean = acc / ((DRAWS / per) * per) as f64;
        assert!((0.99..=1.01).contains(&mean), "mean |h|^2 = {mean}");
    }

    #[test]
    fn mimo_is_reproducible() {
        let a = sample_rayleigh_mimo(3, 2, 5, &mut RngStream::new(9, 4)).unwrap();
        let b = sample_rayleigh_mimo(3, 2, 5, &mut RngStream::new(9, 4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mimo_rejects_empty() {
        assert!(sample_rayleigh_mimo(0, 2, 0, &mut RngStream::new(0, 0)).is_err());
    }

    fn quantile(mut xs: Vec<f64>, q: f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        xs[((xs.len() as f64) * q) as usize]
    }

    #[test]
    fn scalar_gain_median_is_ln2() {
        let mut rng = RngStream::new(2, 0);
        let gains: Vec<f64> = (0..DRAWS)
            .map(|_| sample_rayleigh_mimo(1, 1, 0, &mut rng).unwrap().h[(0, 0)].norm_sqr())
            .collect();
        let med = quantile(gains, 0.5);
        let ln2 = std::f64::consts::LN_2;
        assert!((med - ln2).abs() / ln2 < 0.02, "median {med}");
    }

    #[test]
    fn scalar_link_mean_at_15db() {
        let mut rng = RngStream::new(3, 0);
        let mean = (0..DRAWS)
            .map(|_| sample_scalar_link(15.0, Fading::Rayleigh, &mut rng, 0).snr_linear)
            .sum::<f64>()
            / DRAWS as f64;
        assert!((mean - 31.622_776_6).abs() / 31.622_776_6 < 0.02, "mean {mean}");
    }

    #[test]
    fn scalar_link_without_fading_is_exact() {
        let mut rng = RngStream::new(4, 0);
        assert_eq!(sample_scalar_link(0.0, Fading::None, &mut rng, 0).snr_linear, 1.0);
    }

    #[test]
    fn scalar_link_normalised_cdf_is_exponential() {
        let mut rng = RngStream::new(5, 0);
        let mean = db_to_linear(15.0);
        let xs: Vec<f64> = (0..DRAWS)
            .map(|_| sample_scalar_link(15.0, Fading::Rayleigh, &mut rng, 0).snr_linear / mean)
            .collect();
        for q in [0.25, 0.5, 0.75] {
            let expected = -(1.0f64 - q).ln();
            let got = quantile(xs.clone(), q);
            assert!((got - expected).abs() / expected < 0.02, "q={q}: {got} vs {expected}");
        }
    }

    #[test]
    fn awgn_zero_variance_is_identity() {
        let s = ComplexVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(-3.0, 0.5)]);
        assert_eq!(awgn(&s, 0.0, &mut RngStream::new(0, 0)).unwrap(), s);
    }

    #[test]
    fn awgn_power_and_mean() {
        let mut rng = RngStream::new(6, 0);
        let zero = ComplexVector::zeros(DRAWS);
        let out = awgn(&zero, 1.0, &mut rng).unwrap();
        let power = out.iter().map(|z| z.norm_sqr()).sum::<f64>() / DRAWS as f64;
        assert!((power - 1.0).abs() < 0.02, "power {power}");

        let s = ComplexVector::from_element(DRAWS, C64::new(0.7, -0.3));
        let out = awgn(&s, 0.5, &mut rng).unwrap();
        let mean = out.iter().sum::<C64>() / DRAWS as f64;
        assert!((mean - C64::new(0.7, -0.3)).norm() < 0.01);
    }

    #[test]
    fn awgn_rejects_negative_variance() {
        let s = ComplexVector::zeros(2);
        assert!(awgn(&s, -1.0, &mut RngStream::new(0, 0)).is_err());
    }
}

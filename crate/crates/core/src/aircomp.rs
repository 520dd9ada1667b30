//! MIMO over-the-air computation.
//!
//! Each device `k` precodes an `N`-symbol payload `x_k` with a truncated
//! zero-forcing precoder `W_k = V_k(:,1:N) diag(1/σ_1..σ_N)`, so its effective
//! channel `H_k W_k` is the orthonormal basis `U_k` of its dominant left
//! singular subspace. The access point applies the aggregation beamformer
//! `A^H` to the superposition:
//!
//! ```text
//! y = Σ_k A^H H_k W_k x_k + A^H n
//! ```
//!
//! `A` is the Grassmann centroid of `{U_k}`. Two transmission modes are
//! supported:
//!
//! - [`TransmitMode::Aligned`]: each device pre-multiplies by `(A^H U_k)^{-1}`
//!   so the noise-free output is exactly `Σ_k x_k`; beamformer quality shows
//!   up as transmit power.
//! - [`TransmitMode::Raw`]: no gain inversion. Each device only rotates its
//!   stream basis inside its own subspace (unitary polar factor of
//!   `(A^H U_k)^H`), which leaves `span(H_k W_k)` unchanged; the residual
//!   error then depends only on the principal angles between `U_k` and `A`.

use serde::{Deserialize, Serialize};

use crate::channel::{awgn, MimoChannel};
use crate::linalg::{grassmann_centroid, svd, ComplexMatrix, ComplexVector, Subspace, C64};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Precoders refuse channels whose N-th singular value is below this.
pub const DEFAULT_SIGMA_MIN: f64 = 1e-6;
/// Largest tolerated condition number of `A^H U_k` in aligned mode.
pub const MAX_ALIGNMENT_CONDITION: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    /// `M_t × N`.
    pub w: ComplexMatrix,
    pub device_id: usize,
}

pub fn zf_precoder(channel: &MimoChannel, n: usize) -> Result<(Precoder, Subspace)> {
    zf_precoder_with_threshold(channel, n, DEFAULT_SIGMA_MIN)
}

pub fn zf_precoder_with_threshold(channel: &MimoChannel, n: usize, sigma_min: f64) -> Result<(Precoder, Subspace)> {
    let (m_r, m_t) = (channel.rx_antennas(), channel.tx_antennas());
    if n == 0 || n > m_r.min(m_t) {
        return Err(Error::dims(format!("{n} streams requested on a {m_r}x{m_t} channel")));
    }
    let dec = svd(&channel.h)?;
    let sigma_n = dec.singular_values[n - 1];
    if sigma_n < sigma_min {
        return Err(Error::IllConditionedChannel {
            device_id: channel.device_id,
            sigma: sigma_n,
            threshold: sigma_min,
        });
    }
    let mut w = dec.v.columns(0, n).clone_owned();
    for j in 0..n {
        w.column_mut(j).unscale_mut(dec.singular_values[j]);
    }
    let effective = Subspace::new(dec.u.columns(0, n).clone_owned())?;
    Ok((
        Precoder {
            w,
            device_id: channel.device_id,
        },
        effective,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationBeamformer {
    /// `M_r × N` with orthonormal columns.
    pub a: ComplexMatrix,
    pub non_unique_warning: bool,
}

impl AggregationBeamformer {
    pub fn from_subspace(s: Subspace) -> Self {
        Self {
            a: s.into_basis(),
            non_unique_warning: false,
        }
    }

    pub fn streams(&self) -> usize {
        self.a.ncols()
    }
}

/// Grassmann centroid of the devices' effective subspaces.
pub fn design_beamformer(channels: &[MimoChannel], n: usize) -> Result<AggregationBeamformer> {
    if channels.is_empty() {
        return Err(Error::invalid("design_beamformer needs at least one channel"));
    }
    let subspaces = channels
        .iter()
        .map(|ch| zf_precoder(ch, n).map(|(_, u)| u))
        .collect::<Result<Vec<_>>>()?;
    let centroid = grassmann_centroid(&subspaces, n)?;
    Ok(AggregationBeamformer {
        a: centroid.subspace.into_basis(),
        non_unique_warning: centroid.non_unique,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransmitMode {
    Raw,
    Aligned,
}

impl TransmitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TransmitMode::Raw => "raw",
            TransmitMode::Aligned => "aligned",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DeviceTransmission<'a> {
    pub channel: &'a MimoChannel,
    pub precoder: &'a Precoder,
    pub payload: &'a ComplexVector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExclusionReason {
    AlignmentSingular { condition: f64 },
    PowerCap { power: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exclusion {
    pub device_id: usize,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AirCompResult {
    pub y: ComplexVector,
    /// Sum of the payloads of the devices that transmitted.
    pub target: ComplexVector,
    /// `‖y − target‖² / N`.
    pub mse: f64,
    /// `‖W_k · correction · x_k‖²`, zero for excluded devices.
    pub per_device_tx_power: Vec<f64>,
    pub excluded: Vec<Exclusion>,
}

impl AirCompResult {
    pub fn participants(&self) -> usize {
        self.per_device_tx_power.len() - self.excluded.len()
    }
}

pub fn transmit_round(
    a: &AggregationBeamformer,
    devices: &[DeviceTransmission<'_>],
    noise_variance: f64,
    mode: TransmitMode,
    rng: &mut RngStream,
) -> Result<AirCompResult> {
    transmit_round_capped(a, devices, noise_variance, mode, None, rng)
}

/// [`transmit_round`] with an optional per-device transmit power cap; devices
/// above the cap stay silent and are listed in [`AirCompResult::excluded`].
pub fn transmit_round_capped(
    a: &AggregationBeamformer,
    devices: &[DeviceTransmission<'_>],
    noise_variance: f64,
    mode: TransmitMode,
    power_cap: Option<f64>,
    rng: &mut RngStream,
) -> Result<AirCompResult> {
    let m_r = a.a.nrows();
    let n = a.streams();
    let a_h = a.a.adjoint();

    let mut received = ComplexVector::zeros(m_r);
    let mut target = ComplexVector::zeros(n);
    let mut powers = Vec::with_capacity(devices.len());
    let mut excluded = Vec::new();

    for dev in devices {
        let (h, w, x) = (&dev.channel.h, &dev.precoder.w, dev.payload);
        if h.nrows() != m_r || w.nrows() != h.ncols() || w.ncols() != n || x.len() != n {
            return Err(Error::dims(format!(
                "device {}: H {}x{}, W {}x{}, payload {} against A {}x{}",
                dev.channel.device_id,
                h.nrows(),
                h.ncols(),
                w.nrows(),
                w.ncols(),
                x.len(),
                m_r,
                n
            )));
        }
        if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("non-finite payload"));
        }
        let effective = h * w;
        let mixing = &a_h * &effective;
        let dec = svd(&mixing)?;

        let correction = match mode {
            TransmitMode::Raw => &dec.v * dec.u.adjoint(),
            TransmitMode::Aligned => {
                let smax = dec.singular_values[0];
                let smin = dec.singular_values[n - 1];
                let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
                if condition > MAX_ALIGNMENT_CONDITION {
                    log::debug!(
                        "device {} excluded: {}",
                        dev.channel.device_id,
                        Error::AlignmentSingular {
                            device_id: dev.channel.device_id,
                            condition
                        }
                    );
                    excluded.push(Exclusion {
                        device_id: dev.channel.device_id,
                        reason: ExclusionReason::AlignmentSingular { condition },
                    });
                    powers.push(0.0);
                    continue;
                }
                // (A^H U_k)^{-1} = V diag(1/σ) U^H
                let mut v_scaled = dec.v.clone();
                for j in 0..n {
                    v_scaled.column_mut(j).unscale_mut(dec.singular_values[j]);
                }
                v_scaled * dec.u.adjoint()
            }
        };

        let tx = w * (&correction * x);
        let power = tx.norm_squared();
        if let Some(cap) = power_cap {
            if power > cap {
                excluded.push(Exclusion {
                    device_id: dev.channel.device_id,
                    reason: ExclusionReason::PowerCap { power },
                });
                powers.push(0.0);
                continue;
            }
        }
        powers.push(power);
        received += h * tx;
        target += x;
    }

    let received = awgn(&received, noise_variance, rng)?;
    let y = a_h * received;
    let mse = (&y - &target).norm_squared() / n as f64;
    Ok(AirCompResult {
        y,
        target,
        mse,
        per_device_tx_power: powers,
        excluded,
    })
}

/// Server-side average `y / K`.
pub fn aircomp_average(result: &AirCompResult, k: usize) -> ComplexVector {
    result.y.unscale(k.max(1) as f64)
}

/// Packs consecutive real coefficients into complex symbols (`re`, `im`);
/// an odd trailing coefficient is paired with zero.
pub fn real_to_payload(values: &[f64]) -> Vec<C64> {
    values
        .chunks(2)
        .map(|c| C64::new(c[0], c.get(1).copied().unwrap_or(0.0)))
        .collect()
}

/// Inverse of [`real_to_payload`], truncated to `len` coefficients.
pub fn payload_to_real(symbols: &[C64], len: usize) -> Vec<f64> {
    symbols.iter().flat_map(|z| [z.re, z.im]).take(len).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_rayleigh_mimo;
    use crate::linalg::{orthonormality_error, proj_dist_fro};
    use nalgebra::DVector;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_payload(n: usize, rng: &mut RngStream) -> ComplexVector {
        ComplexVector::from_fn(n, |_, _| rng.complex_normal())
    }

    #[test]
    fn identity_channel_precoder() {
        let ch = MimoChannel::new(ComplexMatrix::identity(2, 2), 0).unwrap();
        let (p, u) = zf_precoder(&ch, 2).unwrap();
        assert!((p.w.clone() - ComplexMatrix::identity(2, 2)).norm() < 1e-12);
        assert!((u.basis() - ComplexMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn diagonal_channel_is_inverted() {
        let h = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(2.0), c(1.0)]));
        let ch = MimoChannel::new(h.clone(), 0).unwrap();
        let (p, _) = zf_precoder(&ch, 2).unwrap();
        let expected = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(0.5), c(1.0)]));
        assert!((p.w.clone() - expected).norm() < 1e-12);
        assert!((h * p.w - ComplexMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn random_precoder_yields_left_singular_basis() {
        let mut rng = RngStream::new(1, 0);
        let ch = sample_rayleigh_mimo(4, 3, 0, &mut rng).unwrap();
        let (p, u) = zf_precoder(&ch, 2).unwrap();
        let dec = svd(&ch.h).unwrap();
        let hw = &ch.h * &p.w;
        assert!((&hw - dec.u.columns(0, 2)).norm() < 1e-8);
        assert!((hw - u.basis()).norm() < 1e-8);
        assert!(orthonormality_error(u.basis()) < 1e-10);
    }

    #[test]
    fn rank_deficient_channel_is_rejected() {
        let h = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0), c(0.0)]));
        let ch = MimoChannel::new(h, 3).unwrap();
        match zf_precoder(&ch, 2) {
            Err(Error::IllConditionedChannel { device_id, .. }) => assert_eq!(device_id, 3),
            other => panic!("expected IllConditionedChannel, got {other:?}"),
        }
        assert!(zf_precoder(&ch, 3).is_err());
    }

    #[test]
    fn beamformer_single_and_duplicated() {
        let mut rng = RngStream::new(2, 0);
        let ch = sample_rayleigh_mimo(4, 3, 0, &mut rng).unwrap();
        let (_, u) = zf_precoder(&ch, 2).unwrap();
        let single = design_beamformer(std::slice::from_ref(&ch), 2).unwrap();
        let s1 = Subspace::new(single.a.clone()).unwrap();
        assert!(proj_dist_fro(&u, &s1).unwrap() < 1e-8);
        let dup = design_beamformer(&[ch.clone(), ch.clone(), ch], 2).unwrap();
        let s3 = Subspace::new(dup.a).unwrap();
        assert!(proj_dist_fro(&s1, &s3).unwrap() < 1e-8);
        assert!(design_beamformer(&[], 2).is_err());
    }

    #[test]
    fn aligned_single_device_is_lossless() {
        let ch = MimoChannel::new(ComplexMatrix::identity(2, 2), 0).unwrap();
        let (p, _) = zf_precoder(&ch, 2).unwrap();
        let a = design_beamformer(std::slice::from_ref(&ch), 2).unwrap();
        let x = ComplexVector::from_vec(vec![C64::new(1.0, -1.0), C64::new(0.5, 2.0)]);
        let dev = DeviceTransmission {
            channel: &ch,
            precoder: &p,
            payload: &x,
        };
        let r = transmit_round(&a, &[dev], 0.0, TransmitMode::Aligned, &mut RngStream::new(0, 0)).unwrap();
        assert!((&r.y - &x).norm() < 1e-12);
        assert_eq!(r.mse, 0.0);
    }

    #[test]
    fn aligned_sum_is_exact_without_noise() {
        let mut rng = RngStream::new(3, 0);
        let chans: Vec<_> = (0..3)
            .map(|k| sample_rayleigh_mimo(4, 3, k, &mut rng).unwrap())
            .collect();
        let pre: Vec<_> = chans.iter().map(|c| zf_precoder(c, 2).unwrap().0).collect();
        let xs: Vec<_> = (0..3).map(|_| random_payload(2, &mut rng)).collect();
        let a = design_beamformer(&chans, 2).unwrap();
        let devs: Vec<_> = (0..3)
            .map(|k| DeviceTransmission {
                channel: &chans[k],
                precoder: &pre[k],
                payload: &xs[k],
            })
            .collect();
        let r = transmit_round(&a, &devs, 0.0, TransmitMode::Aligned, &mut rng).unwrap();
        let sum = xs.iter().fold(ComplexVector::zeros(2), |acc, x| acc + x);
        assert!((&r.y - &sum).norm() < 1e-9);
        assert!(r.mse < 1e-18);
        let avg = aircomp_average(&r, 3);
        assert!((avg - sum.unscale(3.0)).norm() < 1e-9);
    }

    #[test]
    fn raw_mode_matches_explicit_arithmetic() {
        let mut rng = RngStream::new(4, 0);
        let chans: Vec<_> = (0..2)
            .map(|k| sample_rayleigh_mimo(4, 3, k, &mut rng).unwrap())
            .collect();
        let pre: Vec<_> = chans.iter().map(|c| zf_precoder(c, 2).unwrap().0).collect();
        let xs: Vec<_> = (0..2).map(|_| random_payload(2, &mut rng)).collect();
        let a = design_beamformer(&chans, 2).unwrap();
        let devs: Vec<_> = (0..2)
            .map(|k| DeviceTransmission {
                channel: &chans[k],
                precoder: &pre[k],
                payload: &xs[k],
            })
            .collect();
        let r = transmit_round(&a, &devs, 0.0, TransmitMode::Raw, &mut rng).unwrap();

        // Oracle: the rotation Q makes A^H U Q Hermitian PSD; build it from the
        // polar decomposition of M = A^H H W via M^H M = R S² R^H.
        let mut expected = ComplexVector::zeros(2);
        for k in 0..2 {
            let m = a.a.adjoint() * &chans[k].h * &pre[k].w;
            let d = svd(&m).unwrap();
            let q = &d.v * d.u.adjoint();
            let mq = &m * &q;
            assert!((&mq - mq.adjoint()).norm() < 1e-10);
            expected += a.a.adjoint() * (&chans[k].h * (&pre[k].w * (q * &xs[k])));
        }
        assert!((&r.y - expected).norm() < 1e-10);
        let sum = &xs[0] + &xs[1];
        assert!((r.mse - (&r.y - sum).norm_squared() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn misaligned_device_is_excluded() {
        // effective subspace orthogonal to the beamformer
        let h = ComplexMatrix::identity(2, 1);
        let ch = MimoChannel::new(h, 7).unwrap();
        let (p, _) = zf_precoder(&ch, 1).unwrap();
        let a = AggregationBeamformer::from_subspace(
            Subspace::new(ComplexMatrix::from_column_slice(2, 1, &[c(0.0), c(1.0)])).unwrap(),
        );
        let x = ComplexVector::from_element(1, c(1.0));
        let dev = DeviceTransmission {
            channel: &ch,
            precoder: &p,
            payload: &x,
        };
        let r = transmit_round(&a, &[dev], 0.0, TransmitMode::Aligned, &mut RngStream::new(0, 0)).unwrap();
        assert_eq!(r.excluded.len(), 1);
        assert_eq!(r.excluded[0].device_id, 7);
        assert_eq!(r.participants(), 0);
    }

    #[test]
    fn power_cap_excludes_weak_devices() {
        let h = ComplexMatrix::identity(2, 2).scale(0.01);
        let ch = MimoChannel::new(h, 0).unwrap();
        let (p, _) = zf_precoder(&ch, 2).unwrap();
        let a = design_beamformer(std::slice::from_ref(&ch), 2).unwrap();
        let x = ComplexVector::from_element(2, c(1.0));
        let dev = DeviceTransmission {
            channel: &ch,
            precoder: &p,
            payload: &x,
        };
        let r = transmit_round_capped(
            &a,
            &[dev],
            0.0,
            TransmitMode::Aligned,
            Some(100.0),
            &mut RngStream::new(0, 0),
        )
        .unwrap();
        assert!(matches!(r.excluded[0].reason, ExclusionReason::PowerCap { .. }));
    }

    #[test]
    fn power_grows_as_channel_weakens() {
        let mut rng = RngStream::new(5, 0);
        let base = sample_rayleigh_mimo(4, 3, 0, &mut rng).unwrap();
        let other = sample_rayleigh_mimo(4, 3, 1, &mut rng).unwrap();
        let x = random_payload(2, &mut rng);
        let mut last = 0.0;
        for scale in [1.0, 0.5, 0.25] {
            let ch = MimoChannel::new(base.h.scale(scale), 0).unwrap();
            let chans = [ch, other.clone()];
            let pre: Vec<_> = chans.iter().map(|c| zf_precoder(c, 2).unwrap().0).collect();
            let a = design_beamformer(&chans, 2).unwrap();
            let devs: Vec<_> = (0..2)
                .map(|k| DeviceTransmission {
                    channel: &chans[k],
                    precoder: &pre[k],
                    payload: &x,
                })
                .collect();
            let r = transmit_round(&a, &devs, 0.0, TransmitMode::Aligned, &mut rng).unwrap();
            assert!(r.per_device_tx_power[0] > last);
            last = r.per_device_tx_power[0];
        }
    }

    #[test]
    fn payload_mapping_roundtrip() {
        assert_eq!(
            real_to_payload(&[1.0, 2.0, 3.0]),
            vec![C64::new(1.0, 2.0), C64::new(3.0, 0.0)]
        );
        let v = vec![0.1, -0.2, 0.3, 0.4, 0.5];
        assert_eq!(payload_to_real(&real_to_payload(&v), v.len()), v);
    }

    #[test]
    fn average_arithmetic() {
        let r = AirCompResult {
            y: ComplexVector::from_vec(vec![c(2.0), c(4.0)]),
            target: ComplexVector::zeros(2),
            mse: 0.0,
            per_device_tx_power: vec![],
            excluded: vec![],
        };
        assert_eq!(aircomp_average(&r, 2), ComplexVector::from_vec(vec![c(1.0), c(2.0)]));
        assert_eq!(aircomp_average(&r, 1), r.y);
    }
}

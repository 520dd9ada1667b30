//! Monte-Carlo AirComp sweeps over system dimensions, SNR and mode.
//!
//! Within a trial every beamformer sees the same channels, payloads and
//! receiver noise, so centroid and random-beamformer rows are paired.

use std::io::Write;
use std::path::Path;

use super::config::{noise_variance, ExperimentConfig, ExperimentKind};
use super::metrics::fmt_float;
use crate::aircomp::{
    design_beamformer, transmit_round_capped, zf_precoder, AggregationBeamformer, DeviceTransmission, TransmitMode,
};
use crate::channel::sample_rayleigh_mimo;
use crate::linalg::{ComplexMatrix, ComplexVector, Subspace};
use crate::rng::{RngStream, StreamTag};
use crate::{Error, Result};

pub const SWEEP_HEADER: [&str; 10] = [
    "k",
    "m_r",
    "m_t",
    "n",
    "snr_db",
    "mode",
    "beamformer",
    "trials",
    "mean_mse",
    "mean_power",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamformerKind {
    Centroid,
    Random,
}

impl BeamformerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Centroid => "centroid",
            Self::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub m_r: usize,
    pub m_t: usize,
    pub n: usize,
    pub snr_db: f64,
    pub mode: TransmitMode,
    pub beamformer: BeamformerKind,
    pub trials: usize,
    pub mean_mse: f64,
    /// Mean transmit power of participating devices.
    pub mean_power: f64,
}

/// Haar-distributed `m × n` orthonormal basis.
pub fn random_beamformer(m: usize, n: usize, rng: &mut RngStream) -> Result<AggregationBeamformer> {
    let g = ComplexMatrix::from_fn(m, n, |_, _| rng.complex_normal());
    Ok(AggregationBeamformer::from_subspace(Subspace::orthonormalize(&g)?))
}

/// One grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellParams {
    pub k: usize,
    pub m_r: usize,
    pub m_t: usize,
    pub n: usize,
    pub snr_db: f64,
    pub mode: TransmitMode,
}

/// `(mse, mean power)` of the centroid beamformer and, when requested, of
/// the random beamformer on the same draw.
pub type TrialPair = ((f64, f64), Option<(f64, f64)>);

/// Paired per-trial outcomes for one cell; the random entry is `None`
/// unless requested.
pub fn run_cell_trials(
    seed: u64,
    cell: CellParams,
    trials: usize,
    with_random: bool,
    power_cap: Option<f64>,
) -> Result<Vec<TrialPair>> {
    let noise = noise_variance(cell.snr_db);
    let mut out = Vec::with_capacity(trials);
    for t in 0..trials as u64 {
        let channels = (0..cell.k)
            .map(|d| {
                let mut rng = RngStream::derive(seed, StreamTag::Channel, d as u64, t);
                sample_rayleigh_mimo(cell.m_r, cell.m_t, d, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let precoders = channels
            .iter()
            .map(|c| zf_precoder(c, cell.n).map(|(p, _)| p))
            .collect::<Result<Vec<_>>>()?;
        let payloads: Vec<ComplexVector> = (0..cell.k)
            .map(|d| {
                let mut rng = RngStream::derive(seed, StreamTag::Payload, d as u64, t);
                ComplexVector::from_fn(cell.n, |_, _| rng.complex_normal())
            })
            .collect();
        let devices: Vec<DeviceTransmission<'_>> = channels
            .iter()
            .zip(&precoders)
            .zip(&payloads)
            .map(|((channel, precoder), payload)| DeviceTransmission {
                channel,
                precoder,
                payload,
            })
            .collect();
        let evaluate = |a: &AggregationBeamformer| -> Result<(f64, f64)> {
            let mut rng = RngStream::derive(seed, StreamTag::Noise, 0, t);
            let r = transmit_round_capped(a, &devices, noise, cell.mode, power_cap, &mut rng)?;
            let p = r.participants();
            let power = if p == 0 {
                0.0
            } else {
                r.per_device_tx_power.iter().sum::<f64>() / p as f64
            };
            Ok((r.mse, power))
        };
        let centroid = evaluate(&design_beamformer(&channels, cell.n)?)?;
        let random = if with_random {
            let mut rng = RngStream::derive(seed, StreamTag::Beamformer, 0, t);
            Some(evaluate(&random_beamformer(cell.m_r, cell.n, &mut rng)?)?)
        } else {
            None
        };
        out.push((centroid, random));
    }
    Ok(out)
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    if cfg.kind != ExperimentKind::AircompSweep {
        return Err(Error::Config(format!("{} is not a sweep", cfg.kind.as_str())));
    }
    cfg.validate()?;
    let s = &cfg.sweep;
    let mut rows = Vec::new();
    for &k in &s.devices {
        for &m_r in &s.rx_antennas {
            for &m_t in &s.tx_antennas {
                for &n in &s.streams {
                    for &snr_db in &s.snr_db {
                        for &mode in &s.modes {
                            let cell = CellParams {
                                k,
                                m_r,
                                m_t,
                                n,
                                snr_db,
                                mode,
                            };
                            let trials =
                                run_cell_trials(cfg.seed, cell, s.trials, s.compare_random, cfg.channel.power_cap)?;
                            let mean =
                                |f: &dyn Fn(&TrialPair) -> f64| trials.iter().map(f).sum::<f64>() / trials.len() as f64;
                            let row = |beamformer, mean_mse, mean_power| SweepRow {
                                k,
                                m_r,
                                m_t,
                                n,
                                snr_db,
                                mode,
                                beamformer,
                                trials: s.trials,
                                mean_mse,
                                mean_power,
                            };
                            rows.push(row(BeamformerKind::Centroid, mean(&|t| t.0 .0), mean(&|t| t.0 .1)));
                            if s.compare_random {
                                rows.push(row(
                                    BeamformerKind::Random,
                                    mean(&|t| t.1.unwrap().0),
                                    mean(&|t| t.1.unwrap().1),
                                ));
                            }
                            log::debug!("sweep cell {cell:?} done");
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_sweep_to<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.m_r.to_string(),
            r.m_t.to_string(),
            r.n.to_string(),
            if r.snr_db.is_finite() {
                fmt_float(r.snr_db)
            } else {
                "inf".to_owned()
            },
            r.mode.as_str().to_owned(),
            r.beamformer.as_str().to_owned(),
            r.trials.to_string(),
            fmt_float(r.mean_mse),
            fmt_float(r.mean_power),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep(rows: &[SweepRow], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_sweep_to(rows, std::fs::File::create(path)?)
}

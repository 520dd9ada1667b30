//! Federated learning rounds: every device computes a local gradient on the
//! broadcast model, the server aggregates and takes one SGD step.
//!
//! Digital uplinks quantize each gradient (hierarchical codes, signSGD or
//! raw floats) and the server averages the reconstructions. The analog
//! uplink sends gradients over a MIMO AirComp channel and divides the
//! received sum by the number of participants.

use std::time::Instant;

use nalgebra::DVector;

use super::codebook::{build_bundle, BundleSpec};
use super::config::{noise_variance, ExperimentConfig, ExperimentKind, QuantPolicy};
use super::data::{prepare_data, Dataset};
use super::metrics::RoundMetrics;
use crate::aircomp::{
    design_beamformer, payload_to_real, real_to_payload, transmit_round_capped, zf_precoder, DeviceTransmission,
};
use crate::channel::sample_rayleigh_mimo;
use crate::codebooks::{deserialize_bundle, CodebookBundle};
use crate::gradquant::{
    decode_code, decompose, dequantize, encode_code, quantize, signsgd_dequantize, signsgd_quantize,
};
use crate::learners::{evaluate, fed_apply, fed_local_gradient, FedModel, LabeledSample};
use crate::linalg::{ComplexVector, C64};
use crate::rng::{RngStream, StreamTag};
use crate::{Error, Result};

/// Stepwise federated experiment.
pub struct FederatedRun {
    cfg: ExperimentConfig,
    data: Dataset,
    model: FedModel,
    bundle: Option<CodebookBundle>,
    round: usize,
    cum_bits: u64,
}

/// Server-side result of one uplink.
struct Aggregate {
    mean: Vec<f64>,
    /// Step size to apply to `mean`.
    lr: f64,
    /// Payload bits per device, for digital uplinks.
    bits: Option<u64>,
    /// Mean AirComp MSE, for the analog uplink.
    mse: Option<f64>,
}

fn local_batch(shard: &[LabeledSample], size: usize, rng: &mut RngStream) -> Vec<LabeledSample> {
    if size == 0 || size >= shard.len() {
        return shard.to_vec();
    }
    rand::seq::index::sample(rng, shard.len(), size)
        .into_iter()
        .map(|i| shard[i].clone())
        .collect()
}

fn mean_of(vectors: &[Vec<f64>]) -> Vec<f64> {
    let n = vectors.len() as f64;
    let mut out = vec![0.0; vectors[0].len()];
    for v in vectors {
        out.iter_mut().zip(v).for_each(|(o, x)| *o += x / n);
    }
    out
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

impl FederatedRun {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        if !matches!(
            cfg.kind,
            ExperimentKind::FederatedQuantized | ExperimentKind::FederatedAircomp
        ) {
            return Err(Error::Config(format!(
                "{} is not a federated experiment",
                cfg.kind.as_str()
            )));
        }
        cfg.validate()?;
        let data = prepare_data(cfg)?;
        let arch = cfg.learner.architecture(data.features, data.classes)?;
        let model = FedModel::random(arch, &mut RngStream::derive(cfg.seed, StreamTag::ModelInit, 0, 0))?;
        let mut run = Self {
            cfg: cfg.clone(),
            data,
            model,
            bundle: None,
            round: 0,
            cum_bits: 0,
        };
        if cfg.kind == ExperimentKind::FederatedQuantized && cfg.quantization.policy == QuantPolicy::Hierarchical {
            run.bundle = Some(run.load_or_train_bundle()?);
        }
        Ok(run)
    }

    pub fn model(&self) -> &FedModel {
        &self.model
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn bundle(&self) -> Option<&CodebookBundle> {
        self.bundle.as_ref()
    }

    pub fn round(&self) -> usize {
        self.round
    }

    fn bundle_spec(&self, norm_range: (f64, f64)) -> BundleSpec {
        let q = &self.cfg.quantization;
        BundleSpec {
            dim: self.model.parameter_count(),
            blocks: q.blocks,
            bits_norm: q.bits_norm,
            bits_block: q.bits_block,
            bits_hinge: q.bits_hinge,
            norm_range,
        }
    }

    fn load_or_train_bundle(&self) -> Result<CodebookBundle> {
        if let Some(path) = &self.cfg.quantization.codebook {
            let bundle = deserialize_bundle(&std::fs::read(path)?)?;
            if !self.bundle_spec((0.0, 1.0)).matches(&bundle) {
                return Err(Error::Config(format!(
                    "codebook {} (M={}, L={}, bits {}/{}/{}) does not match the configured quantizer for dim {}",
                    path.display(),
                    bundle.blocks(),
                    bundle.block_len(),
                    bundle.norm_cb.bits(),
                    bundle.block_cb.bits(),
                    bundle.hinge_cb.bits(),
                    self.model.parameter_count()
                )));
            }
            return Ok(bundle);
        }
        self.pilot_bundle()
    }

    /// Trains a bundle from gradients harvested during a short unquantized
    /// pilot run started from the initial model: the norm range is
    /// `[0, 3·median ρ]` and the hinge codebook is fitted to the observed
    /// hinge vectors.
    pub fn pilot_bundle(&self) -> Result<CodebookBundle> {
        let target = self.cfg.quantization.pilot_gradients.max(1);
        let mut model = self.model.clone();
        let mut norms = Vec::with_capacity(target);
        let mut hinges = Vec::with_capacity(target);
        let mut round = 0u64;
        while norms.len() < target {
            let grads = self.device_gradients_with(&model, StreamTag::Pilot, round)?;
            for g in &grads {
                if norms.len() < target {
                    let d = decompose(g, self.cfg.quantization.blocks).map_err(|e| Error::Config(e.to_string()))?;
                    norms.push(d.rho);
                    hinges.push(d.hinge);
                }
            }
            model = fed_apply(&model, &mean_of(&grads), self.cfg.learner.lr)?;
            round += 1;
        }
        let hi = 3.0 * median(&mut norms);
        if !(hi > 0.0) {
            return Err(Error::NumericalFailure("pilot gradients are all zero".into()));
        }
        let spec = self.bundle_spec((0.0, hi));
        let training = (hinges.len() >= 1 << spec.bits_hinge).then_some(hinges.as_slice());
        if training.is_none() {
            log::info!(
                "{} pilot hinge vectors for {} codewords, using synthetic hinge training",
                hinges.len(),
                1 << spec.bits_hinge
            );
        }
        build_bundle(&spec, training, self.cfg.seed)
    }

    fn device_gradients_with(&self, model: &FedModel, tag: StreamTag, round: u64) -> Result<Vec<Vec<f64>>> {
        self.data
            .shards
            .iter()
            .enumerate()
            .map(|(k, shard)| {
                let mut rng = RngStream::derive(self.cfg.seed, tag, k as u64, round);
                let batch = local_batch(shard, self.cfg.learner.batch_size, &mut rng);
                fed_local_gradient(model, &batch)
            })
            .collect()
    }

    /// Local gradients of every device at the current model and round.
    pub fn device_gradients(&self) -> Result<Vec<Vec<f64>>> {
        self.device_gradients_with(&self.model, StreamTag::Batch, self.round as u64)
    }

    /// Local batches of every device for the current round.
    pub fn device_batches(&self) -> Vec<Vec<LabeledSample>> {
        self.data
            .shards
            .iter()
            .enumerate()
            .map(|(k, shard)| {
                let mut rng = RngStream::derive(self.cfg.seed, StreamTag::Batch, k as u64, self.round as u64);
                local_batch(shard, self.cfg.learner.batch_size, &mut rng)
            })
            .collect()
    }

    fn aggregate(&self, grads: &[Vec<f64>]) -> Result<Aggregate> {
        let q = &self.cfg.quantization;
        let dim = self.model.parameter_count();
        let lr = self.cfg.learner.lr;
        if self.cfg.kind == ExperimentKind::FederatedAircomp {
            let (mean, mse) = self.over_the_air(grads)?;
            return Ok(Aggregate {
                mean,
                lr,
                bits: None,
                mse: Some(mse),
            });
        }
        let (mean, lr, bits) = match q.policy {
            QuantPolicy::Unquantized => (mean_of(grads), lr, q.float_bits as u64 * dim as u64),
            QuantPolicy::Signsgd => {
                let decoded: Vec<Vec<f64>> = grads.iter().map(|g| signsgd_dequantize(&signsgd_quantize(g))).collect();
                (mean_of(&decoded), q.sign_lr, dim as u64)
            }
            QuantPolicy::Hierarchical => {
                let bundle = self.bundle.as_ref().expect("hierarchical runs own a bundle");
                let mut bits = 0;
                let mut decoded = Vec::with_capacity(grads.len());
                for g in grads {
                    let code = quantize(g, bundle)?;
                    bits = code.payload_bits();
                    let received = decode_code(&encode_code(&code)?)?;
                    decoded.push(dequantize(&received, bundle)?);
                }
                (mean_of(&decoded), lr, bits)
            }
        };
        Ok(Aggregate {
            mean,
            lr,
            bits: Some(bits),
            mse: None,
        })
    }

    /// Sends every gradient as complex symbols, `N` per channel use, and
    /// returns the received average with the mean per-use AirComp MSE.
    fn over_the_air(&self, grads: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
        let ch = &self.cfg.channel;
        let round = self.round as u64;
        let n = ch.streams;
        let channels = (0..grads.len())
            .map(|k| {
                let mut rng = RngStream::derive(self.cfg.seed, StreamTag::Channel, k as u64, round);
                sample_rayleigh_mimo(ch.rx_antennas, ch.tx_antennas, k, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let precoders = channels
            .iter()
            .map(|c| zf_precoder(c, n).map(|(p, _)| p))
            .collect::<Result<Vec<_>>>()?;
        let beamformer = design_beamformer(&channels, n)?;
        let symbols: Vec<Vec<C64>> = grads.iter().map(|g| real_to_payload(g)).collect();
        let uses = symbols[0].len().div_ceil(n);
        let noise = noise_variance(ch.snr_db);
        let mut rng = RngStream::derive(self.cfg.seed, StreamTag::Noise, 0, round);
        let mut received = Vec::with_capacity(uses * n);
        let mut mse = 0.0;
        for u in 0..uses {
            let payloads: Vec<ComplexVector> = symbols
                .iter()
                .map(|s| DVector::from_fn(n, |i, _| s.get(u * n + i).copied().unwrap_or_default()))
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
            let r = transmit_round_capped(&beamformer, &devices, noise, ch.mode, ch.power_cap, &mut rng)?;
            let participants = r.participants();
            if participants < grads.len() {
                log::debug!(
                    "round {round}, use {u}: {participants}/{} devices transmitted",
                    grads.len()
                );
            }
            let scale = if participants == 0 {
                0.0
            } else {
                1.0 / participants as f64
            };
            received.extend(r.y.iter().map(|z| z * scale));
            mse += r.mse / uses as f64;
        }
        Ok((payload_to_real(&received, grads[0].len()), mse))
    }

    /// Runs one round and returns its metrics.
    pub fn step(&mut self) -> Result<RoundMetrics> {
        let start = Instant::now();
        let grads = self.device_gradients()?;
        let Aggregate {
            mean: agg,
            lr,
            bits,
            mse,
        } = self.aggregate(&grads)?;
        self.model = fed_apply(&self.model, &agg, lr)?;
        let dim = self.model.parameter_count();
        if let Some(b) = bits {
            self.cum_bits += b * grads.len() as u64;
        }
        let metrics = RoundMetrics {
            round: self.round,
            test_accuracy: Some(evaluate(&self.model, &self.data.test)?),
            cum_bits: bits.map(|_| self.cum_bits),
            bits_per_coeff: bits.map(|b| b as f64 / dim as f64),
            aircomp_mse: mse,
            selected_device: None,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        self.round += 1;
        Ok(metrics)
    }
}

pub fn run_federated(cfg: &ExperimentConfig) -> Result<Vec<RoundMetrics>> {
    let mut run = FederatedRun::new(cfg)?;
    let mut out = Vec::with_capacity(cfg.rounds);
    for _ in 0..cfg.rounds {
        let m = run.step()?;
        log::debug!("round {}: accuracy {:?}", m.round, m.test_accuracy);
        out.push(m);
    }
    if let Some(last) = out.last() {
        log::info!(
            "{} {}: final accuracy {:?} after {} rounds",
            cfg.kind.as_str(),
            cfg.quantization.policy.as_str(),
            last.test_accuracy,
            out.len()
        );
    }
    Ok(out)
}

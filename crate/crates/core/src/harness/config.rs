//! Experiment configuration files (TOML).
//!
//! ```toml
//! schema_version = 1
//! kind = "federated_quantized"
//! seed = 7
//! devices = 20
//! rounds = 200
//!
//! [quantization]
//! policy = "hierarchical"
//! ```
//!
//! Every section is optional and falls back to its defaults; unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aircomp::TransmitMode;
use crate::channel::Fading;
use crate::learners::{Activation, Architecture, Loss};
use crate::scheduling::Policy;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    FederatedQuantized,
    FederatedAircomp,
    CentralizedScheduling,
    AircompSweep,
    CodebookBuild,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FederatedQuantized => "federated_quantized",
            Self::FederatedAircomp => "federated_aircomp",
            Self::CentralizedScheduling => "centralized_scheduling",
            Self::AircompSweep => "aircomp_sweep",
            Self::CodebookBuild => "codebook_build",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::devices")]
    pub devices: usize,
    #[serde(default = "defaults::rounds")]
    pub rounds: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub quantization: QuantizationConfig,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub scheduling: SchedulingConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

mod defaults {
    pub fn devices() -> usize {
        10
    }
    pub fn rounds() -> usize {
        100
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    /// Mean link SNR; `inf` means noiseless.
    pub snr_db: f64,
    pub fading: Fading,
    pub rx_antennas: usize,
    pub tx_antennas: usize,
    pub streams: usize,
    pub mode: TransmitMode,
    pub power_cap: Option<f64>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            snr_db: 15.0,
            fading: Fading::Rayleigh,
            rx_antennas: 4,
            tx_antennas: 3,
            streams: 2,
            mode: TransmitMode::Aligned,
            power_cap: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuantPolicy {
    #[default]
    Hierarchical,
    Signsgd,
    Unquantized,
}

impl QuantPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Hierarchical => "hierarchical",
            Self::Signsgd => "signsgd",
            Self::Unquantized => "unquantized",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantizationConfig {
    pub policy: QuantPolicy,
    /// Number of blocks `M`.
    pub blocks: usize,
    pub bits_norm: u8,
    pub bits_block: u8,
    pub bits_hinge: u8,
    /// Prebuilt bundle; when absent the bundle is trained from a pilot run.
    pub codebook: Option<PathBuf>,
    pub pilot_gradients: usize,
    /// Server learning rate applied to the averaged sign vector.
    pub sign_lr: f64,
    /// Bits per coefficient charged for unquantized transmission.
    pub float_bits: u32,
}

impl Default for QuantizationConfig {
    fn default() -> Self {
        Self {
            policy: QuantPolicy::Hierarchical,
            blocks: 4,
            bits_norm: 4,
            bits_block: 5,
            bits_hinge: 4,
            codebook: None,
            pilot_gradients: 500,
            sign_lr: 0.01,
            float_bits: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    /// Hidden layer widths; empty means logistic regression.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub loss: Loss,
    pub lr: f64,
    /// Local minibatch size; 0 uses every local sample.
    pub batch_size: usize,
    pub svm_c: f64,
    pub svm_step0: f64,
    pub svm_tau: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            hidden: Vec::new(),
            activation: Activation::Tanh,
            loss: Loss::CrossEntropy,
            lr: 0.1,
            batch_size: 32,
            svm_c: 10.0,
            svm_step0: 0.1,
            svm_tau: 50.0,
        }
    }
}

impl LearnerConfig {
    pub fn architecture(&self, features: usize, classes: usize) -> Result<Architecture> {
        let mut layers = vec![features];
        layers.extend(&self.hidden);
        layers.push(if classes == 2 { 1 } else { classes });
        Architecture::new(layers, self.activation, self.loss).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    #[default]
    Synthetic,
    Mnist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub source: DatasetSource,
    pub dim: usize,
    /// Distance between the two class means.
    pub separation: f64,
    /// Per-coordinate standard deviation of each class.
    pub scale: f64,
    /// Training samples held by each device.
    pub per_device: usize,
    pub test_size: usize,
    /// Labelled samples available to the server before the first round.
    pub seed_size: usize,
    pub mnist_images: Option<PathBuf>,
    pub mnist_labels: Option<PathBuf>,
    /// Restrict MNIST to two digits, relabelled 0 and 1.
    pub mnist_classes: Option<[usize; 2]>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            source: DatasetSource::Synthetic,
            dim: 64,
            separation: 2.0,
            scale: 1.0,
            per_device: 100,
            test_size: 2000,
            seed_size: 20,
            mnist_images: None,
            mnist_labels: None,
            mnist_classes: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SampleSelection {
    /// Each device ranks its whole pool and offers its most uncertain sample.
    #[default]
    MaxOverPool,
    /// Each device offers one uniformly drawn sample.
    RandomSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulingConfig {
    pub policy: Policy,
    pub sample_selection: SampleSelection,
}

impl Default for SchedulingConfig {
    fn default() -> Self {
        Self {
            policy: Policy::Importance,
            sample_selection: SampleSelection::MaxOverPool,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub devices: Vec<usize>,
    pub rx_antennas: Vec<usize>,
    pub tx_antennas: Vec<usize>,
    pub streams: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub modes: Vec<TransmitMode>,
    pub trials: usize,
    /// Also evaluate a Haar-random beamformer on the same draws.
    pub compare_random: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            devices: vec![3],
            rx_antennas: vec![4],
            tx_antennas: vec![3],
            streams: vec![2],
            snr_db: vec![f64::INFINITY, 10.0],
            modes: vec![TransmitMode::Aligned, TransmitMode::Raw],
            trials: 1000,
            compare_random: true,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    /// Minimal valid config of the given kind with every section defaulted.
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind,
            seed: 0,
            devices: defaults::devices(),
            rounds: defaults::rounds(),
            output: None,
            channel: ChannelConfig::default(),
            quantization: QuantizationConfig::default(),
            learner: LearnerConfig::default(),
            dataset: DatasetConfig::default(),
            scheduling: SchedulingConfig::default(),
            sweep: SweepConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(config_err(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        positive("devices", self.devices)?;
        positive("rounds", self.rounds)?;
        let ch = &self.channel;
        if ch.snr_db.is_nan() {
            return Err(config_err("channel.snr_db must be a number or inf"));
        }
        positive("channel.rx_antennas", ch.rx_antennas)?;
        positive("channel.tx_antennas", ch.tx_antennas)?;
        positive("channel.streams", ch.streams)?;
        if self.kind == ExperimentKind::FederatedAircomp && ch.streams > ch.rx_antennas.min(ch.tx_antennas) {
            return Err(config_err(format!(
                "channel.streams = {} exceeds min(rx_antennas, tx_antennas) = {}",
                ch.streams,
                ch.rx_antennas.min(ch.tx_antennas)
            )));
        }
        let q = &self.quantization;
        positive("quantization.blocks", q.blocks)?;
        for (name, b) in [
            ("quantization.bits_norm", q.bits_norm),
            ("quantization.bits_block", q.bits_block),
            ("quantization.bits_hinge", q.bits_hinge),
        ] {
            if b == 0 || b > 16 {
                return Err(config_err(format!("{name} = {b} must be in 1..=16")));
            }
        }
        if !(q.sign_lr > 0.0) {
            return Err(config_err("quantization.sign_lr must be positive"));
        }
        let l = &self.learner;
        if !(l.lr > 0.0) || !(l.svm_c > 0.0) || !(l.svm_step0 > 0.0) || !(l.svm_tau > 0.0) {
            return Err(config_err("learner rates, svm_c and svm_tau must be positive"));
        }
        if l.hidden.contains(&0) {
            return Err(config_err("learner.hidden widths must be positive"));
        }
        let d = &self.dataset;
        match d.source {
            DatasetSource::Synthetic => {
                positive("dataset.dim", d.dim)?;
                if !(d.scale > 0.0) || !d.separation.is_finite() {
                    return Err(config_err("dataset.scale must be positive and separation finite"));
                }
            }
            DatasetSource::Mnist => {
                for (name, p) in [
                    ("dataset.mnist_images", &d.mnist_images),
                    ("dataset.mnist_labels", &d.mnist_labels),
                ] {
                    let p = p
                        .as_ref()
                        .ok_or_else(|| config_err(format!("{name} is required for mnist")))?;
                    if !p.exists() {
                        return Err(config_err(format!("{name}: {} does not exist", p.display())));
                    }
                }
            }
        }
        positive("dataset.per_device", d.per_device)?;
        positive("dataset.test_size", d.test_size)?;
        if let Some(p) = &q.codebook {
            if !p.exists() {
                return Err(config_err(format!(
                    "quantization.codebook: {} does not exist",
                    p.display()
                )));
            }
        }
        if self.kind == ExperimentKind::CentralizedScheduling && d.seed_size < 2 {
            return Err(config_err("dataset.seed_size must be at least 2"));
        }
        if self.kind == ExperimentKind::AircompSweep {
            let s = &self.sweep;
            positive("sweep.trials", s.trials)?;
            for (name, list) in [
                ("sweep.devices", &s.devices),
                ("sweep.rx_antennas", &s.rx_antennas),
                ("sweep.tx_antennas", &s.tx_antennas),
                ("sweep.streams", &s.streams),
            ] {
                if list.is_empty() || list.contains(&0) {
                    return Err(config_err(format!("{name} must be a nonempty list of positive values")));
                }
            }
            if s.snr_db.is_empty() || s.snr_db.iter().any(|v| v.is_nan()) || s.modes.is_empty() {
                return Err(config_err("sweep.snr_db and sweep.modes must be nonempty"));
            }
            for &m_r in &s.rx_antennas {
                for &m_t in &s.tx_antennas {
                    for &n in &s.streams {
                        if n > m_r.min(m_t) {
                            return Err(config_err(format!(
                                "infeasible sweep cell: N = {n} > min(M_r = {m_r}, M_t = {m_t})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_toml_str(&text).map_err(|e| match e {
        Error::Config(msg) => config_err(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Noise variance for a receive SNR given in dB relative to unit signal power.
pub fn noise_variance(snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        10f64.powf(-snr_db / 10.0)
    }
}

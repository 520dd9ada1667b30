//! Experiment orchestration: configuration, the three experiment families,
//! codebook construction and metrics files.

pub mod centralized;
pub mod codebook;
pub mod config;
pub mod data;
pub mod federated;
pub mod metrics;
pub mod sweep;

use std::path::Path;

pub use centralized::{run_centralized, CentralizedOutcome};
pub use codebook::{build_bundle, read_hinge_csv, BundleSpec};
pub use config::{load_config, ExperimentConfig, ExperimentKind, QuantPolicy, SCHEMA_VERSION};
pub use data::{prepare_data, Dataset};
pub use federated::{run_federated, FederatedRun};
pub use metrics::{read_metrics, write_metrics, RoundMetrics, METRICS_HEADER};
pub use sweep::{run_sweep, write_sweep, SweepRow, SWEEP_HEADER};

use crate::codebooks::{serialize_bundle, CodebookBundle};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub enum ExperimentOutput {
    Rounds {
        metrics: Vec<RoundMetrics>,
        early_stopped: bool,
    },
    Sweep(Vec<SweepRow>),
    Codebook(CodebookBundle),
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match cfg.kind {
        ExperimentKind::FederatedQuantized | ExperimentKind::FederatedAircomp => Ok(ExperimentOutput::Rounds {
            metrics: run_federated(cfg)?,
            early_stopped: false,
        }),
        ExperimentKind::CentralizedScheduling => {
            let out = run_centralized(cfg)?;
            Ok(ExperimentOutput::Rounds {
                metrics: out.metrics,
                early_stopped: out.early_stopped,
            })
        }
        ExperimentKind::AircompSweep => Ok(ExperimentOutput::Sweep(run_sweep(cfg)?)),
        ExperimentKind::CodebookBuild => {
            let mut fed = cfg.clone();
            fed.kind = ExperimentKind::FederatedQuantized;
            fed.quantization.policy = QuantPolicy::Hierarchical;
            fed.quantization.codebook = None;
            let run = FederatedRun::new(&fed)?;
            Ok(ExperimentOutput::Codebook(
                run.bundle()
                    .cloned()
                    .ok_or_else(|| Error::Config("no bundle was built".into()))?,
            ))
        }
    }
}

/// Metrics and sweeps are written as CSV, codebooks as bundle files.
pub fn write_output(output: &ExperimentOutput, path: &Path) -> Result<()> {
    match output {
        ExperimentOutput::Rounds { metrics, .. } => write_metrics(metrics, path),
        ExperimentOutput::Sweep(rows) => write_sweep(rows, path),
        ExperimentOutput::Codebook(bundle) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, serialize_bundle(bundle))?;
            Ok(())
        }
    }
}

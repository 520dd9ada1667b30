//! Centralized edge learning with device scheduling.
//!
//! Each channel use: devices report SNR and their most uncertain sample
//! under the current SVM, the scheduler picks one device, that device sends
//! its sample through an analog noisy link, the server labels it and takes
//! one SVM step. Transmitted samples leave the device pool.

use std::time::Instant;

use super::config::{ExperimentConfig, ExperimentKind, SampleSelection};
use super::data::prepare_data;
use super::metrics::RoundMetrics;
use crate::channel::sample_scalar_link;
use crate::learners::{
    evaluate, noisy_receive, svm_init, svm_step_size, svm_update, LabeledSample, SvmModel, SvmSchedule,
};
use crate::rng::{RngStream, StreamTag};
use crate::scheduling::{distance_uncertainty, select_device, DeviceReport};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct CentralizedOutcome {
    pub metrics: Vec<RoundMetrics>,
    /// Set when every device pool ran dry before the last round.
    pub early_stopped: bool,
    pub model: SvmModel,
}

fn report(
    cfg: &ExperimentConfig,
    model: &SvmModel,
    device: usize,
    pool: &[LabeledSample],
    round: u64,
) -> Result<DeviceReport> {
    let mut link_rng = RngStream::derive(cfg.seed, StreamTag::Channel, device as u64, round);
    let link = sample_scalar_link(cfg.channel.snr_db, cfg.channel.fading, &mut link_rng, device);
    let (best_sample_index, max_uncertainty) = match cfg.scheduling.sample_selection {
        SampleSelection::MaxOverPool => {
            let mut best = (0, f64::NEG_INFINITY);
            for (i, s) in pool.iter().enumerate() {
                let u = distance_uncertainty(model, &s.features)?;
                if u > best.1 {
                    best = (i, u);
                }
            }
            best
        }
        SampleSelection::RandomSample => {
            let mut rng = RngStream::derive(cfg.seed, StreamTag::Scheduling, device as u64, round);
            let i = rng.index(pool.len());
            (i, distance_uncertainty(model, &pool[i].features)?)
        }
    };
    Ok(DeviceReport {
        device_id: device,
        snr_linear: link.snr_linear,
        max_uncertainty,
        best_sample_index,
    })
}

pub fn run_centralized(cfg: &ExperimentConfig) -> Result<CentralizedOutcome> {
    if cfg.kind != ExperimentKind::CentralizedScheduling {
        return Err(Error::Config(format!(
            "{} is not a scheduling experiment",
            cfg.kind.as_str()
        )));
    }
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    if data.classes != 2 {
        return Err(Error::Config("scheduling experiments need a binary dataset".into()));
    }
    let mut pools = data.shards;
    let mut model = svm_init(&data.seed_set, cfg.learner.svm_c).map_err(|e| match e {
        Error::InvalidInput(msg) => Error::Config(format!("seed set: {msg}")),
        other => other,
    })?;
    let schedule = SvmSchedule {
        step0: cfg.learner.svm_step0,
        tau: cfg.learner.svm_tau,
    };
    let mut metrics = Vec::with_capacity(cfg.rounds);
    let mut early_stopped = false;
    for t in 0..cfg.rounds {
        let start = Instant::now();
        let round = t as u64;
        let reports = pools
            .iter()
            .enumerate()
            .filter(|(_, pool)| !pool.is_empty())
            .map(|(k, pool)| report(cfg, &model, k, pool, round))
            .collect::<Result<Vec<_>>>()?;
        if reports.is_empty() {
            log::warn!("all device pools exhausted after {t} rounds");
            early_stopped = true;
            break;
        }
        let decision = select_device(&reports, cfg.scheduling.policy)?;
        let chosen = reports
            .iter()
            .find(|r| r.device_id == decision.selected_device)
            .expect("selected device reported");
        let sample = pools[chosen.device_id].remove(chosen.best_sample_index);
        let mut noise = RngStream::derive(cfg.seed, StreamTag::Noise, chosen.device_id as u64, round);
        let received = noisy_receive(&sample.features, chosen.snr_linear, &mut noise);
        model = svm_update(&model, &received, sample.signed_label(), svm_step_size(t, schedule));
        metrics.push(RoundMetrics {
            round: t,
            test_accuracy: Some(evaluate(&model, &data.test)?),
            selected_device: Some(chosen.device_id),
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
            ..Default::default()
        });
    }
    if let Some(last) = metrics.last() {
        log::info!(
            "scheduling {}: final accuracy {:?} after {} rounds",
            cfg.scheduling.policy.as_str(),
            last.test_accuracy,
            metrics.len()
        );
    }
    Ok(CentralizedOutcome {
        metrics,
        early_stopped,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduling::Policy;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(ExperimentKind::CentralizedScheduling);
        cfg.devices = 4;
        cfg.rounds = 30;
        cfg.dataset.dim = 5;
        cfg.dataset.per_device = 20;
        cfg.dataset.test_size = 300;
        cfg
    }

    fn selections(cfg: &ExperimentConfig) -> Vec<Option<usize>> {
        run_centralized(cfg)
            .unwrap()
            .metrics
            .iter()
            .map(|m| m.selected_device)
            .collect()
    }

    #[test]
    fn noiseless_importance_equals_data_aware() {
        let mut cfg = small();
        cfg.channel.snr_db = f64::INFINITY;
        let a = selections(&cfg);
        cfg.scheduling.policy = Policy::DataAware;
        assert_eq!(a, selections(&cfg));
    }

    #[test]
    fn single_device_policies_agree() {
        let mut cfg = small();
        cfg.devices = 1;
        let runs: Vec<_> = [Policy::Importance, Policy::ChannelAware, Policy::DataAware]
            .into_iter()
            .map(|p| {
                cfg.scheduling.policy = p;
                run_centralized(&cfg).unwrap().metrics
            })
            .map(|m| m.into_iter().map(|r| r.test_accuracy).collect::<Vec<_>>())
            .collect();
        assert_eq!(runs[0], runs[1]);
        assert_eq!(runs[0], runs[2]);
    }

    #[test]
    fn exhausted_pools_stop_early() {
        let mut cfg = small();
        cfg.devices = 2;
        cfg.dataset.per_device = 5;
        let out = run_centralized(&cfg).unwrap();
        assert!(out.early_stopped);
        assert_eq!(out.metrics.len(), 10);
    }

    #[test]
    fn random_sample_mode_runs() {
        let mut cfg = small();
        cfg.scheduling.sample_selection = SampleSelection::RandomSample;
        assert_eq!(run_centralized(&cfg).unwrap().metrics.len(), 30);
    }
}

//! Device scheduling for centralized edge learning.
//!
//! Each device reports its link SNR and the largest uncertainty among its
//! local samples. The data importance indicator
//!
//! ```text
//! I_k = −1/SNR_k + max_n U(x_{k,n})
//! ```
//!
//! rewards both a good channel and an informative sample; the scheduler
//! picks the device with the largest metric of the chosen policy.

use serde::{Deserialize, Serialize};

use crate::learners::SvmModel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    #[default]
    Importance,
    ChannelAware,
    DataAware,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Importance => "importance",
            Self::ChannelAware => "channel_aware",
            Self::DataAware => "data_aware",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceReport {
    pub device_id: usize,
    pub snr_linear: f64,
    pub max_uncertainty: f64,
    pub best_sample_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulingDecision {
    pub selected_device: usize,
    /// DII of every report, in report order.
    pub dii_values: Vec<f64>,
    pub policy: Policy,
}

fn check_snr(snr_linear: f64) -> Result<()> {
    if snr_linear > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("SNR {snr_linear} must be positive")))
    }
}

/// Index of the first maximum.
fn first_argmax(values: impl IntoIterator<Item = f64>) -> Option<(usize, f64)> {
    values.into_iter().enumerate().fold(None, |best, (i, v)| match best {
        Some((_, b)) if v <= b => best,
        _ => Some((i, v)),
    })
}

/// `(−1/snr + max(uncertainties), lowest argmax)`.
pub fn dii(snr_linear: f64, uncertainties: &[f64]) -> Result<(f64, usize)> {
    check_snr(snr_linear)?;
    let (best, max) =
        first_argmax(uncertainties.iter().copied()).ok_or_else(|| Error::invalid("no uncertainties to rank"))?;
    Ok((max - snr_linear.recip(), best))
}

pub fn report_dii(report: &DeviceReport) -> f64 {
    report.max_uncertainty - report.snr_linear.recip()
}

/// Picks the device maximizing the policy metric; ties go to the lowest
/// `device_id`.
pub fn select_device(reports: &[DeviceReport], policy: Policy) -> Result<SchedulingDecision> {
    if reports.is_empty() {
        return Err(Error::invalid("no device reports"));
    }
    for r in reports {
        check_snr(r.snr_linear)?;
    }
    let dii_values: Vec<f64> = reports.iter().map(report_dii).collect();
    let metric = |i: usize| match policy {
        Policy::Importance => dii_values[i],
        Policy::ChannelAware => reports[i].snr_linear,
        Policy::DataAware => reports[i].max_uncertainty,
    };
    let mut best = 0;
    for i in 1..reports.len() {
        let (m, b) = (metric(i), metric(best));
        if m > b || (m == b && reports[i].device_id < reports[best].device_id) {
            best = i;
        }
    }
    Ok(SchedulingDecision {
        selected_device: reports[best].device_id,
        dii_values,
        policy,
    })
}

/// `−|w·x + b| / ‖w‖`: zero on the decision boundary, decreasing with
/// distance from it.
pub fn distance_uncertainty(model: &SvmModel, x: &[f64]) -> Result<f64> {
    let norm = model.weight_norm();
    if norm == 0.0 {
        return Err(Error::ModelDegenerate("SVM weight vector is zero".into()));
    }
    Ok(-model.decision(x).abs() / norm)
}

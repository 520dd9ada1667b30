//! Binary soft-margin SVM with objective `‖w‖²/(2C) + max(0, 1 − y(w·x + b))`
//! per sample. The bias is not regularized.

use super::{Classifier, LabeledSample};
use crate::rng::RngStream;
use crate::{Error, Result};

const INIT_ITERS: usize = 2000;
const INIT_STEP0: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub w: Vec<f64>,
    pub b: f64,
    pub c: f64,
}

impl SvmModel {
    pub fn zeros(dim: usize, c: f64) -> Self {
        Self {
            w: vec![0.0; dim],
            b: 0.0,
            c,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.w.len()
    }

    /// `w·x + b`.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.b
    }

    pub fn weight_norm(&self) -> f64 {
        self.w.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Mean soft-margin objective over `samples`.
    pub fn objective(&self, samples: &[LabeledSample]) -> f64 {
        let reg = self.weight_norm().powi(2) / (2.0 * self.c);
        let hinge = samples
            .iter()
            .map(|s| (1.0 - s.signed_label() * self.decision(&s.features)).max(0.0))
            .sum::<f64>()
            / samples.len().max(1) as f64;
        reg + hinge
    }
}

impl Classifier for SvmModel {
    fn predict(&self, features: &[f64]) -> usize {
        usize::from(self.decision(features) >= 0.0)
    }
}

/// Decaying step schedule `step0 / (1 + t/τ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmSchedule {
    pub step0: f64,
    pub tau: f64,
}

impl Default for SvmSchedule {
    fn default() -> Self {
        Self { step0: 0.1, tau: 50.0 }
    }
}

pub fn svm_step_size(t: usize, schedule: SvmSchedule) -> f64 {
    schedule.step0 / (1.0 + t as f64 / schedule.tau)
}

/// One subgradient step on a single sample with label `y ∈ {−1, +1}`.
pub fn svm_update(model: &SvmModel, x: &[f64], y: f64, step: f64) -> SvmModel {
    let active = y * model.decision(x) < 1.0;
    let w = model
        .w
        .iter()
        .zip(x)
        .map(|(&w, &xi)| {
            let hinge = if active { y * xi } else { 0.0 };
            w - step * (w / model.c - hinge)
        })
        .collect();
    let b = if active { model.b + step * y } else { model.b };
    SvmModel { w, b, c: model.c }
}

/// Full-batch subgradient descent on the seed set. The regularizer is
/// applied as a proximal shrink, which stays stable for any `C > 0`; the
/// best iterate by objective is returned.
pub fn svm_init(seed: &[LabeledSample], c: f64) -> Result<SvmModel> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::invalid(format!("C = {c} must be positive")));
    }
    let dim = seed
        .first()
        .map(|s| s.features.len())
        .ok_or_else(|| Error::invalid("empty seed set"))?;
    if seed.iter().any(|s| s.features.len() != dim) {
        return Err(Error::dims("inconsistent seed feature dimensions"));
    }
    let has = |l: usize| seed.iter().any(|s| s.label == l);
    if !has(0) || !has(1) {
        return Err(Error::invalid("seed data must contain both classes"));
    }
    let n = seed.len() as f64;
    let mut model = SvmModel::zeros(dim, c);
    let mut best = model.clone();
    let mut best_obj = model.objective(seed);
    for t in 0..INIT_ITERS {
        let step = INIT_STEP0 / (1.0 + t as f64 / 50.0);
        let mut gw = vec![0.0; dim];
        let mut gb = 0.0;
        for s in seed {
            let y = s.signed_label();
            if y * model.decision(&s.features) < 1.0 {
                gw.iter_mut().zip(&s.features).for_each(|(g, x)| *g += y * x / n);
                gb += y / n;
            }
        }
        let shrink = 1.0 + step / c;
        model
            .w
            .iter_mut()
            .zip(&gw)
            .for_each(|(w, g)| *w = (*w + step * g) / shrink);
        model.b += step * gb;
        let obj = model.objective(seed);
        if obj < best_obj {
            best_obj = obj;
            best.clone_from(&model);
        }
    }
    Ok(best)
}

/// Adds i.i.d. `N(0, 1/snr)` noise to every coordinate.
pub fn noisy_receive(x: &[f64], snr_linear: f64, rng: &mut RngStream) -> Vec<f64> {
    let sd = snr_linear.recip().sqrt();
    x.iter().map(|v| v + sd * rng.standard_normal()).collect()
}

//! Desk-scale learning models: a soft-margin SVM trained one sample at a time
//! and a small fully connected classifier with federated SGD semantics.

mod data;
mod fed;
mod idx;
mod svm;

pub use data::{split_across_devices, GaussianMixture, Standardizer};
pub use fed::{fed_apply, fed_local_gradient, Activation, Architecture, FedModel, Loss};
pub use idx::{load_mnist, mnist_binary, read_idx_images, read_idx_labels, IdxImages};
pub use svm::{noisy_receive, svm_init, svm_step_size, svm_update, SvmModel, SvmSchedule};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    /// Class id; binary tasks use 0 and 1.
    pub label: usize,
    pub origin_device: usize,
}

impl LabeledSample {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Self {
            features,
            label,
            origin_device: 0,
        }
    }

    /// `+1` for class 1, `−1` otherwise.
    pub fn signed_label(&self) -> f64 {
        if self.label == 1 {
            1.0
        } else {
            -1.0
        }
    }
}

pub trait Classifier {
    fn predict(&self, features: &[f64]) -> usize;
}

/// Fraction of samples whose predicted class equals the label.
pub fn evaluate(model: &impl Classifier, test: &[LabeledSample]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    let correct = test.iter().filter(|s| model.predict(&s.features) == s.label).count();
    Ok(correct as f64 / test.len() as f64)
}

//! Dataset preparation shared by the experiment drivers.

use super::config::{DatasetSource, ExperimentConfig};
use crate::learners::{load_mnist, mnist_binary, GaussianMixture, LabeledSample, Standardizer};
use crate::rng::{RngStream, StreamTag};
use crate::{Error, Result};

/// Device ids above any real device, used to give the shared sets their own streams.
const TEST_STREAM: u64 = u64::MAX;
const SEED_SET_STREAM: u64 = u64::MAX - 1;
const SHUFFLE_STREAM: u64 = u64::MAX - 2;

#[derive(Debug, Clone)]
pub struct Dataset {
    /// Local data of each device, `origin_device` set.
    pub shards: Vec<Vec<LabeledSample>>,
    /// Labelled samples the server holds before training starts.
    pub seed_set: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
    pub features: usize,
    pub classes: usize,
}

impl Dataset {
    pub fn pooled(&self) -> Vec<LabeledSample> {
        self.shards.iter().flatten().cloned().collect()
    }
}

fn standardize(
    shards: &mut [Vec<LabeledSample>],
    seed_set: &mut [LabeledSample],
    test: &mut [LabeledSample],
) -> Result<()> {
    let fit_on: Vec<LabeledSample> = shards.iter().flatten().chain(seed_set.iter()).cloned().collect();
    let st = Standardizer::fit(&fit_on)?;
    for shard in shards.iter_mut() {
        st.apply_all(shard);
    }
    st.apply_all(seed_set);
    st.apply_all(test);
    Ok(())
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    let d = &cfg.dataset;
    let k = cfg.devices;
    let (mut shards, mut seed_set, mut test, features, classes) = match d.source {
        DatasetSource::Synthetic => {
            let mix = GaussianMixture::symmetric_binary(d.dim, d.separation, d.scale)
                .map_err(|e| Error::Config(e.to_string()))?;
            let draw = |device: u64, count: usize| {
                mix.sample(count, &mut RngStream::derive(cfg.seed, StreamTag::Data, device, 0))
            };
            let shards: Vec<_> = (0..k).map(|dev| draw(dev as u64, d.per_device)).collect();
            (
                shards,
                draw(SEED_SET_STREAM, d.seed_size),
                draw(TEST_STREAM, d.test_size),
                d.dim,
                2,
            )
        }
        DatasetSource::Mnist => {
            let (images, labels) = (d.mnist_images.as_ref(), d.mnist_labels.as_ref());
            let (images, labels) = images
                .zip(labels)
                .ok_or_else(|| Error::Config("mnist paths missing".into()))?;
            let mut all = load_mnist(images, labels)?;
            let classes = match d.mnist_classes {
                Some([neg, pos]) => {
                    all = mnist_binary(all, neg, pos);
                    2
                }
                None => all.iter().map(|s| s.label + 1).max().unwrap_or(0),
            };
            let need = d.seed_size + k * d.per_device + d.test_size;
            if all.len() < need {
                return Err(Error::Config(format!(
                    "MNIST provides {} samples, configuration needs {need}",
                    all.len()
                )));
            }
            let mut rng = RngStream::derive(cfg.seed, StreamTag::Data, SHUFFLE_STREAM, 0);
            rand::seq::SliceRandom::shuffle(all.as_mut_slice(), &mut rng);
            let features = all[0].features.len();
            let mut rest = all.into_iter();
            let seed_set: Vec<_> = rest.by_ref().take(d.seed_size).collect();
            let shards: Vec<Vec<_>> = (0..k).map(|_| rest.by_ref().take(d.per_device).collect()).collect();
            let test: Vec<_> = rest.take(d.test_size).collect();
            (shards, seed_set, test, features, classes)
        }
    };
    for (dev, shard) in shards.iter_mut().enumerate() {
        shard.iter_mut().for_each(|s| s.origin_device = dev);
    }
    standardize(&mut shards, &mut seed_set, &mut test)?;
    Ok(Dataset {
        shards,
        seed_set,
        test,
        features,
        classes,
    })
}

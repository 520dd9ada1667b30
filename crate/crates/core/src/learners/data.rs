use super::LabeledSample;
use crate::rng::RngStream;
use crate::{Error, Result};

/// Isotropic Gaussian classes: class `c` is drawn from `N(means[c], scale²·I)`.
/// Labels cycle through the classes, so every draw of at least `classes`
/// samples is balanced up to one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub means: Vec<Vec<f64>>,
    pub scale: f64,
}

impl GaussianMixture {
    pub fn new(means: Vec<Vec<f64>>, scale: f64) -> Result<Self> {
        if means.len() < 2 {
            return Err(Error::invalid("a mixture needs at least two classes"));
        }
        let dim = means[0].len();
        if dim == 0 || means.iter().any(|m| m.len() != dim) {
            return Err(Error::dims("class means must share a positive dimension"));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::invalid(format!("covariance scale {scale} must be positive")));
        }
        Ok(Self { means, scale })
    }

    /// Two classes at `±(separation/2)·1/√dim`, so the distance between the
    /// means is `separation`.
    pub fn symmetric_binary(dim: usize, separation: f64, scale: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        let c = 0.5 * separation / (dim as f64).sqrt();
        Self::new(vec![vec![-c; dim], vec![c; dim]], scale)
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn classes(&self) -> usize {
        self.means.len()
    }

    pub fn sample(&self, count: usize, rng: &mut RngStream) -> Vec<LabeledSample> {
        (0..count)
            .map(|i| {
                let label = i % self.classes();
                let features = self.means[label]
                    .iter()
                    .map(|m| m + self.scale * rng.standard_normal())
                    .collect();
                LabeledSample::new(features, label)
            })
            .collect()
    }
}

/// Per-coordinate affine map to zero mean and unit variance, fitted on one
/// set and applied to others.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(samples: &[LabeledSample]) -> Result<Self> {
        let dim = samples
            .first()
            .map(|s| s.features.len())
            .ok_or_else(|| Error::invalid("cannot standardize an empty set"))?;
        let n = samples.len() as f64;
        let mut mean = vec![0.0; dim];
        for s in samples {
            if s.features.len() != dim {
                return Err(Error::dims("inconsistent feature dimensions"));
            }
            mean.iter_mut().zip(&s.features).for_each(|(m, x)| *m += x / n);
        }
        let mut var = vec![0.0; dim];
        for s in samples {
            for ((v, x), m) in var.iter_mut().zip(&s.features).zip(&mean) {
                *v += (x - m) * (x - m) / n;
            }
        }
        // constant coordinates are centred but left unscaled
        let std = var
            .into_iter()
            .map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    pub fn apply_all(&self, samples: &mut [LabeledSample]) {
        for s in samples {
            s.features = self.apply(&s.features);
        }
    }
}

/// Round-robin assignment to `devices` shards, tagging `origin_device`.
pub fn split_across_devices(samples: Vec<LabeledSample>, devices: usize) -> Result<Vec<Vec<LabeledSample>>> {
    if devices == 0 || samples.len() < devices {
        return Err(Error::invalid(format!(
            "cannot split {} samples over {devices} devices",
            samples.len()
        )));
    }
    let mut shards = vec![Vec::with_capacity(samples.len() / devices + 1); devices];
    for (i, mut s) in samples.into_iter().enumerate() {
        s.origin_device = i % devices;
        shards[i % devices].push(s);
    }
    Ok(shards)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_means_are_separated() {
        let g = GaussianMixture::symmetric_binary(16, 3.0, 1.0).unwrap();
        let d: f64 = g.means[0]
            .iter()
            .zip(&g.means[1])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!((d - 3.0).abs() < 1e-12);
    }

    #[test]
    fn standardizer_gives_unit_moments() {
        let g = GaussianMixture::new(vec![vec![5.0, -1.0], vec![7.0, 3.0]], 2.0).unwrap();
        let mut s = g.sample(5000, &mut RngStream::new(1, 0));
        let st = Standardizer::fit(&s).unwrap();
        st.apply_all(&mut s);
        for j in 0..2 {
            let m: f64 = s.iter().map(|x| x.features[j]).sum::<f64>() / s.len() as f64;
            let v: f64 = s.iter().map(|x| (x.features[j] - m).powi(2)).sum::<f64>() / s.len() as f64;
            assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn split_tags_devices() {
        let s: Vec<_> = (0..7).map(|i| LabeledSample::new(vec![i as f64], 0)).collect();
        let shards = split_across_devices(s, 3).unwrap();
        assert_eq!(shards.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 2, 2]);
        assert!(shards[2].iter().all(|x| x.origin_device == 2));
        assert!(split_across_devices(vec![], 1).is_err());
    }
}

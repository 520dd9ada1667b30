//! Lloyd training of nonnegative Grassmannian codebooks.
//!
//! Distortion of a training vector `x` against codeword `c` is `1 − ⟨x, c⟩`.
//! Each iteration assigns vectors to their best codeword and replaces every
//! codeword by the normalized mean of its cell. Empty cells are reseeded from
//! the training vectors with the largest current distortion.

use super::{dot, normalize, CodebookKind, GrassmannCodebook};
use crate::rng::RngStream;
use crate::{Error, Result};

pub const LLOYD_DEFAULT_ITERS: usize = 100;
pub const LLOYD_DEFAULT_TOL: f64 = 1e-8;

const TRAINING_NORM_TOL: f64 = 1e-8;

fn best_codeword(x: &[f64], codewords: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_ip = f64::NEG_INFINITY;
    for (i, c) in codewords.iter().enumerate() {
        let ip = dot(x, c);
        if ip > best_ip {
            best_ip = ip;
            best = i;
        }
    }
    (best, best_ip)
}

/// Farthest-point initialisation: a random first codeword, then repeatedly
/// the training vector with the lowest similarity to its nearest codeword.
fn init_codewords(training: &[Vec<f64>], count: usize, rng: &mut RngStream) -> Vec<Vec<f64>> {
    let mut codewords = vec![training[rng.index(training.len())].clone()];
    let mut nearest: Vec<f64> = training.iter().map(|x| dot(x, &codewords[0])).collect();
    while codewords.len() < count {
        let (far, _) = nearest
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
        let c = training[far].clone();
        for (s, x) in nearest.iter_mut().zip(training) {
            *s = s.max(dot(x, &c));
        }
        codewords.push(c);
    }
    codewords
}

pub fn lloyd_codebook(
    training: &[Vec<f64>],
    bits: u8,
    rng: &mut RngStream,
    max_iters: usize,
    tol: f64,
) -> Result<GrassmannCodebook> {
    if bits == 0 || bits > 16 {
        return Err(Error::invalid(format!("unsupported bit width {bits}")));
    }
    let count = 1usize << bits;
    let dim = training
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::invalid("empty Lloyd training set"))?;
    if training.len() < count {
        return Err(Error::invalid(format!(
            "{} training vectors for {count} codewords",
            training.len()
        )));
    }
    for (i, x) in training.iter().enumerate() {
        if x.len() != dim {
            return Err(Error::dims(format!("training vector {i} has dimension {}", x.len())));
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > TRAINING_NORM_TOL || x.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid(format!(
                "training vector {i} is not a nonnegative unit vector"
            )));
        }
    }

    let mut codewords = init_codewords(training, count, rng);
    let mut assignment = vec![0usize; training.len()];
    let mut distortion = vec![0.0f64; training.len()];
    let mut previous = f64::INFINITY;

    for iter in 0..max_iters {
        for (i, x) in training.iter().enumerate() {
            let (c, ip) = best_codeword(x, &codewords);
            assignment[i] = c;
            distortion[i] = 1.0 - ip;
        }
        let mean = distortion.iter().sum::<f64>() / training.len() as f64;
        if mean > previous + 1e-12 {
            return Err(Error::NumericalFailure(format!(
                "Lloyd distortion increased at iteration {iter}: {previous} -> {mean}"
            )));
        }
        if previous - mean < tol {
            break;
        }
        previous = mean;

        let mut sums = vec![vec![0.0; dim]; count];
        let mut members = vec![0usize; count];
        for (x, &c) in training.iter().zip(&assignment) {
            members[c] += 1;
            sums[c].iter_mut().zip(x).for_each(|(s, v)| *s += v);
        }
        for (c, (sum, &n)) in sums.into_iter().zip(&members).enumerate() {
            if n == 0 {
                continue;
            }
            let mut centroid: Vec<f64> = sum.into_iter().map(|v| v.max(0.0)).collect();
            normalize(&mut centroid);
            codewords[c] = centroid;
        }
        // reseed empty cells from the worst-served training vectors
        let mut by_distortion: Vec<usize> = (0..training.len()).collect();
        by_distortion.sort_by(|&a, &b| distortion[b].total_cmp(&distortion[a]).then(a.cmp(&b)));
        let mut donors = by_distortion.into_iter();
        for c in (0..count).filter(|&c| members[c] == 0) {
            if let Some(i) = donors.next() {
                codewords[c] = training[i].clone();
            }
        }
    }

    GrassmannCodebook::new(codewords, bits, CodebookKind::Nonnegative)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: Vec<f64>) -> Vec<f64> {
        let mut v = v;
        normalize(&mut v);
        v
    }

    #[test]
    fn two_axes_two_codewords() {
        let training = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let cb = lloyd_codebook(&training, 1, &mut RngStream::new(1, 0), 100, 1e-12).unwrap();
        let mut cws = cb.codewords().to_vec();
        cws.sort_by(|a, b| b[0].total_cmp(&a[0]));
        assert_eq!(cws, training);
    }

    #[test]
    fn identical_training_collapses() {
        let v = unit(vec![1.0, 2.0, 3.0]);
        let training = vec![v.clone(); 10];
        let cb = lloyd_codebook(&training, 2, &mut RngStream::new(2, 0), 100, 1e-12).unwrap();
        for x in &training {
            let (c, ip) = best_codeword(x, cb.codewords());
            assert!((1.0 - ip).abs() < 1e-12);
            for (a, b) in cb.codewords()[c].iter().zip(&v) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn separated_clusters_are_recovered() {
        let mut rng = RngStream::new(3, 0);
        let centers: Vec<Vec<f64>> = (0..4)
            .map(|k| {
                let mut c = vec![0.1; 4];
                c[k] = 1.0;
                unit(c)
            })
            .collect();
        let mut training = Vec::new();
        for c in &centers {
            for _ in 0..50 {
                let x: Vec<f64> = c.iter().map(|v| (v + 0.02 * rng.standard_normal()).max(0.0)).collect();
                training.push(unit(x));
            }
        }
        // oracle: k-means style iteration started from the true centres
        let mut oracle = centers.clone();
        for _ in 0..50 {
            let mut sums = vec![vec![0.0; 4]; 4];
            for x in &training {
                let (c, _) = best_codeword(x, &oracle);
                sums[c].iter_mut().zip(x).for_each(|(s, v)| *s += v);
            }
            oracle = sums.into_iter().map(unit).collect();
        }
        let cb = lloyd_codebook(&training, 2, &mut rng, 100, 1e-12).unwrap();
        for o in &oracle {
            let (_, ip) = best_codeword(o, cb.codewords());
            assert!(ip > 0.999, "ip {ip}");
        }
    }

    #[test]
    fn rejects_bad_training() {
        let mut rng = RngStream::new(0, 0);
        assert!(lloyd_codebook(&[], 1, &mut rng, 10, 1e-8).is_err());
        assert!(lloyd_codebook(&[vec![1.0, 0.0]], 1, &mut rng, 10, 1e-8).is_err());
        let neg = vec![vec![1.0, 0.0], vec![0.0, -1.0]];
        assert!(lloyd_codebook(&neg, 1, &mut rng, 10, 1e-8).is_err());
    }
}

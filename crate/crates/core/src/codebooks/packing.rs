//! Grassmannian line packing by alternating projection.
//!
//! Starting from random unit vectors, the Gram matrix is alternately
//! projected onto the structural set (unit diagonal, off-diagonal magnitudes
//! clipped to a target coherence) and the spectral set (PSD, rank at most
//! `dim`), then re-factored into a unit-norm frame. Alternating projection
//! alone gets trapped when lines nearly coincide in low dimension, so a
//! second stage descends the smooth potential `Σ_{i≠j} ⟨c_i, c_j⟩^p` for
//! increasing even `p`, which approaches the coherence as `p` grows. The
//! best frame seen in either stage is kept, so the returned coherence never
//! exceeds the initial one.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{coherence, normalize, CodebookKind, GrassmannCodebook};
use crate::rng::RngStream;
use crate::{Error, Result};

pub const PACKING_DEFAULT_ITERS: usize = 2000;
pub const PACKING_DEFAULT_TOL: f64 = 1e-6;

/// Iterations without improvement before the search gives up.
const STALL_LIMIT: usize = 200;
/// Potential exponents and steps per exponent for the polishing stage.
const POLISH_EXPONENTS: [i32; 3] = [4, 16, 64];
const POLISH_STEPS: usize = 600;
const POLISH_STEP0: f64 = 0.1;
const POLISH_DECAY: f64 = 0.995;

/// Welch lower bound on the coherence of `count` unit vectors in `R^dim`
/// (zero when `count <= dim`).
pub fn welch_bound(dim: usize, count: usize) -> f64 {
    if count <= dim {
        return 0.0;
    }
    (((count - dim) as f64) / ((dim * (count - 1)) as f64)).sqrt()
}

fn gram(frame: &[Vec<f64>]) -> DMatrix<f64> {
    let c = frame.len();
    DMatrix::from_fn(c, c, |i, j| super::dot(&frame[i], &frame[j]))
}

/// Rank-`dim` PSD approximation of `g`, factored back into `count` unit vectors.
fn refactor(g: DMatrix<f64>, dim: usize) -> Option<Vec<Vec<f64>>> {
    let count = g.nrows();
    let eig = SymmetricEigen::try_new(g, 1e-14, 10_000)?;
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut frame = vec![vec![0.0; dim]; count];
    for (r, &src) in order.iter().take(dim).enumerate() {
        let scale = eig.eigenvalues[src].max(0.0).sqrt();
        for (c, col) in frame.iter_mut().enumerate() {
            col[r] = scale * eig.eigenvectors[(c, src)];
        }
    }
    for col in frame.iter_mut() {
        if normalize(col) == 0.0 {
            return None;
        }
    }
    Some(frame)
}

/// Normalised-gradient descent on the coherence potential, starting from
/// `best` and updating it whenever a lower coherence is reached.
fn polish(best: &mut Vec<Vec<f64>>, best_coh: &mut f64, bound: f64, tol: f64) {
    let count = best.len();
    let dim = best[0].len();
    let mut frame = best.clone();
    for p in POLISH_EXPONENTS {
        let mut step = POLISH_STEP0;
        for _ in 0..POLISH_STEPS {
            if *best_coh - bound <= tol {
                return;
            }
            let coh = coherence(&frame);
            if coh == 0.0 {
                return;
            }
            let mut grad = vec![vec![0.0; dim]; count];
            for i in 0..count {
                for j in 0..count {
                    if i != j {
                        let w = (super::dot(&frame[i], &frame[j]) / coh).powi(p - 1);
                        grad[i].iter_mut().zip(&frame[j]).for_each(|(g, v)| *g += w * v);
                    }
                }
            }
            let gnorm = grad.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
            if gnorm == 0.0 {
                break;
            }
            let scale = step * (count as f64).sqrt() / gnorm;
            for (col, g) in frame.iter_mut().zip(&grad) {
                col.iter_mut().zip(g).for_each(|(c, g)| *c -= scale * g);
                normalize(col);
            }
            let coh = coherence(&frame);
            if coh < *best_coh {
                *best_coh = coh;
                best.clone_from(&frame);
            }
            step *= POLISH_DECAY;
        }
    }
}

/// `2^bits`-codeword isotropic codebook; see [`pack_lines`].
pub fn line_packing(
    dim: usize,
    bits: u8,
    rng: &mut RngStream,
    max_iters: usize,
    tol: f64,
) -> Result<GrassmannCodebook> {
    if bits == 0 || bits > 16 {
        return Err(Error::invalid(format!("line packing supports 1..=16 bits, got {bits}")));
    }
    let frame = pack_lines(dim, 1usize << bits, rng, max_iters, tol)?;
    GrassmannCodebook::new(frame, bits, CodebookKind::Isotropic)
}

/// Packs `count` lines through the origin of `R^dim` with low coherence.
pub fn pack_lines(dim: usize, count: usize, rng: &mut RngStream, max_iters: usize, tol: f64) -> Result<Vec<Vec<f64>>> {
    if dim < 2 || count < 2 {
        return Err(Error::invalid(format!(
            "line packing needs dim >= 2 and at least two lines, got dim={dim}, count={count}"
        )));
    }
    let mut frame: Vec<Vec<f64>> = (0..count)
        .map(|_| {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
            normalize(&mut v);
            v
        })
        .collect();

    let bound = welch_bound(dim, count);
    let mut best = frame.clone();
    let mut best_coh = coherence(&frame);
    let mut stalled = 0;

    for _ in 0..max_iters {
        if best_coh - bound <= tol {
            break;
        }
        let target = bound + 0.5 * (best_coh - bound);
        let mut g = gram(&frame);
        for i in 0..count {
            for j in 0..count {
                g[(i, j)] = if i == j { 1.0 } else { g[(i, j)].clamp(-target, target) };
            }
        }
        let Some(next) = refactor(g, dim) else {
            break;
        };
        frame = next;
        let coh = coherence(&frame);
        if coh < best_coh - tol {
            stalled = 0;
        } else {
            stalled += 1;
        }
        if coh <= best_coh {
            best_coh = coh;
            best.clone_from(&frame);
        }
        if stalled >= STALL_LIMIT {
            break;
        }
    }
    polish(&mut best, &mut best_coh, bound, tol);
    log::debug!("line packing dim={dim} count={count}: coherence {best_coh:.6} (Welch {bound:.6})");
    Ok(best)
}

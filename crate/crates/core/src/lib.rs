//! Simulation library for communication-efficient edge learning.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: complex SVD / Hermitian eigen-decomposition and Grassmann
//!   subspace geometry (projection distances, closed-form centroid).
//! - [`rng`] and [`channel`]: reproducible random streams, Rayleigh MIMO and
//!   scalar fading, AWGN.
//! - [`aircomp`]: MIMO over-the-air computation with zero-forcing precoders
//!   and a Grassmann-centroid aggregation beamformer.
//! - [`codebooks`] and [`gradquant`]: hierarchical gradient quantization
//!   (norm / block direction / hinge vector) and the signSGD baseline.
//! - [`scheduling`]: data-importance-aware device scheduling.
//! - [`learners`]: soft-margin SVM, logistic / MLP models, datasets.
//! - [`harness`]: experiment configuration, the round loops and metric files.

// Range checks are written as `!(x > lo)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aircomp;
pub mod channel;
pub mod codebooks;
mod error;
pub mod gradquant;
pub mod harness;
pub mod learners;
pub mod linalg;
pub mod rng;
pub mod scheduling;

pub use error::{Error, Result};

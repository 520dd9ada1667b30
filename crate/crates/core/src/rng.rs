//! Reproducible random streams.
//!
//! Every random draw in the simulator comes from an [`RngStream`] identified
//! by `(seed, stream_id)`. Streams for a particular `(module, device, round)`
//! triple are derived with [`RngStream::derive`], so adding or removing one
//! consumer of randomness never perturbs another.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use nalgebra::Complex;

/// Consumer tags used when fanning a master seed out into streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamTag {
    Data = 1,
    Channel = 2,
    Noise = 3,
    Batch = 4,
    ModelInit = 5,
    Codebook = 6,
    Pilot = 7,
    Scheduling = 8,
    Payload = 9,
    Beamformer = 10,
}

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha12Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self { seed, stream_id, inner }
    }

    /// Stream owned by `(tag, device, round)` under a master seed.
    pub fn derive(seed: u64, tag: StreamTag, device: u64, round: u64) -> Self {
        let id = splitmix64(splitmix64(splitmix64(tag as u64) ^ device) ^ round);
        Self::new(seed, id)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Circularly-symmetric complex Gaussian with unit variance
    /// (real and imaginary parts each of variance 1/2).
    pub fn complex_normal(&mut self) -> Complex<f64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Complex::new(self.standard_normal() * s, self.standard_normal() * s)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform index in `0..n`; `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

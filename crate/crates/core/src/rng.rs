//! Counter-addressed Gaussian streams.
//!
//! Every random quantity is keyed by `(seed, purpose, stream)` and by its
//! coordinate index inside the stream. A stream is a ChaCha8 keystream whose
//! key carries the seed and purpose and whose 64-bit stream id carries the
//! replication. Normal pair `k` (coordinates `2k` and `2k + 1`) always consumes
//! keystream words `4k..4k + 4`, so a coordinate's value does not depend on how
//! many coordinates were drawn before it or on which thread drew it.

use std::f64::consts::TAU;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// What a stream is used for. Distinct purposes never share keystream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Observation = 1,
    PosteriorDraw = 2,
    QuadraticForm = 3,
    PriorDraw = 4,
    FrequentistRadius = 5,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub purpose: Purpose,
    pub stream: u64,
}

impl StreamKey {
    pub fn new(seed: u64, purpose: Purpose, stream: u64) -> Self {
        Self {
            seed,
            purpose,
            stream,
        }
    }

    /// Stream id for replication `rep` of grid point `block` (e.g. the index of n).
    pub fn replication(seed: u64, purpose: Purpose, block: u32, rep: u32) -> Self {
        Self::new(seed, purpose, (u64::from(block) << 32) | u64::from(rep))
    }
}

/// Standard normal variates addressed by coordinate index.
pub struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(key: StreamKey) -> Self {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&key.seed.to_le_bytes());
        seed[8..16].copy_from_slice(&(key.purpose as u64).to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(key.stream);
        Self { rng, spare: None }
    }

    /// Positions the stream so that the next variate is coordinate `index` (0-based).
    pub fn seek(&mut self, index: u64) {
        self.rng.set_word_pos(u128::from(index / 2) * 4);
        self.spare = None;
        if index % 2 == 1 {
            self.next_normal();
        }
    }

    /// Next standard normal variate (Box-Muller on two 53-bit uniforms).
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1], u2 in [0, 1)
        let u1 = ((self.rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
        let u2 = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let radius = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.spare = Some(radius * s);
        radius * c
    }

    /// The first `len` coordinates of the stream.
    pub fn normals(key: StreamKey, len: usize) -> Vec<f64> {
        let mut stream = NormalStream::new(key);
        (0..len).map(|_| stream.next_normal()).collect()
    }
}

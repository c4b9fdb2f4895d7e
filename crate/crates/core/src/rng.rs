//! Reproducible Gaussian noise streams.
//!
//! Each realization of an ensemble draws from the ChaCha8 stream selected by
//! `(master seed, realization index)`. ChaCha is counter based, so stream
//! `i` is fully determined by the pair and does not depend on how many other
//! streams were consumed or on which thread runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// One standard normal draw.
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

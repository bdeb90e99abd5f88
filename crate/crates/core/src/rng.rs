//! Per-trajectory random streams.
//!
//! Every trajectory draws from its own ChaCha8 stream keyed by
//! `(master seed, stream id)`. ChaCha is counter based, so a stream's
//! contents depend only on that key: runs can be scheduled on any number
//! of workers in any order and still reproduce bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_id);
        Self { inner }
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform on [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }
}

/// Packs an ensemble index and a run index into one stream id.
#[inline]
pub fn stream_id(ensemble: u32, run: u32) -> u64 {
    ((ensemble as u64) << 32) | run as u64
}

//! Seeded random streams. Every stochastic component draws from its own
//! ChaCha substream derived from a single user seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Substream ids used across the crate.
pub mod stream {
    pub const MODEL_INIT: u64 = 1;
    pub const EVENT_PAIRS: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const HEAD_INIT: u64 = 4;
    pub const EMBEDDING_INIT: u64 = 5;
    pub const CLOZE: u64 = 6;
    pub const SYNTHETIC: u64 = 7;
    pub const SYNTHETIC_PAIRS: u64 = 8;
    pub const SYNTHETIC_EMBEDDINGS: u64 = 9;
}

/// Deterministic generator for `(seed, stream)`.
pub fn substream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform sample in `[-r, r]`.
pub fn uniform_symmetric<R: Rng>(rng: &mut R, r: f64) -> f64 {
    rng.random_range(-r..=r)
}

//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit RNG. Parallel work derives one
//! independent ChaCha stream per worker or trial from a single 64-bit seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// The `index`-th independent stream for `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

//! Seeded random streams.
//!
//! Every experiment draws from ChaCha8 generators keyed by a 64-bit seed and a
//! stream id. ChaCha8 output is fully specified, so a (seed, stream) pair
//! yields the same sequence on every platform and in any language with a
//! conforming ChaCha implementation. Distinct stream ids never overlap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent purposes that each get their own stream for a given seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Inputs = 1,
    NoiseMask = 2,
    NoiseMagnitude = 3,
    Init = 4,
    Shuffle = 5,
    Gradients = 6,
    Problem = 7,
    Outliers = 8,
}

pub fn stream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

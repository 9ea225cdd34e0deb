//! Seeded random streams.
//!
//! Every consumer of randomness draws from a ChaCha8 stream selected by
//! `(master seed, purpose, index...)`. ChaCha is counter-based, so a stream is
//! a pure function of its coordinates and results do not depend on the order
//! in which streams are consumed or on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for; keeps streams of different consumers disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Approximation = 1,
    SequentialSpace = 2,
    Sampler = 3,
    SampledEval = 4,
    Trial = 5,
    EstimateP = 6,
    Host = 7,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a purpose tag and indices into a 64-bit stream id.
pub fn stream_id(purpose: Purpose, indices: &[u64]) -> u64 {
    indices.iter().fold(splitmix64(purpose as u64), |acc, &i| splitmix64(acc ^ splitmix64(i)))
}

/// The stream at `(seed, purpose, indices)`.
pub fn stream(seed: u64, purpose: Purpose, indices: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(purpose, indices));
    rng
}

/// A child seed, for components that take a plain `u64` seed.
pub fn derive_seed(seed: u64, purpose: Purpose, indices: &[u64]) -> u64 {
    splitmix64(seed ^ stream_id(purpose, indices))
}

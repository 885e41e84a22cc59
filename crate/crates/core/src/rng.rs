//! Seeded random streams.
//!
//! Every stochastic routine draws from `ChaCha8Rng` seeded with
//! `seed_from_u64(seed)` and switched to a numbered stream, so replicate `r`
//! sees the same numbers no matter which thread runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Recorded in report metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9); seed_from_u64(seed), one stream per replicate";

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// Stream ids used by the synthetic generators; permutation replicates use
// their replicate index directly.
pub const STREAM_SAR: u64 = 1 << 40;
pub const STREAM_CONDITIONS: u64 = (1 << 40) + 1;
pub const STREAM_INDICATORS: u64 = (1 << 40) + 2;

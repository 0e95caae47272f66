//! Deterministic seed derivation. Every random stream in the crate is a
//! `ChaCha20Rng` keyed by a base seed plus a path of stream tags.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type SimRng = ChaCha20Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a sequence of stream tags into a new seed.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &tag| splitmix64(acc ^ splitmix64(tag)))
}

pub fn stream(base: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(base, path))
}

/// Stream tags used across the crate so that independent consumers never
/// share a random sequence.
pub mod tags {
    pub const DATA: u64 = 1;
    pub const PARTITION: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const SAMPLING: u64 = 4;
    pub const NOISE: u64 = 5;
}

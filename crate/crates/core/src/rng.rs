//! Seed derivation for reproducible random streams.
//!
//! Every random stream in the crate is a pure function of a master seed and a
//! small tuple of indices (node pair, grid cell, replicate, restart). This is
//! what lets parallel and sequential execution produce identical output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type ChipRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `parts` into `seed`, giving an independent child seed.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// A generator for the stream identified by `(seed, parts)`.
pub fn stream(seed: u64, parts: &[u64]) -> ChipRng {
    ChipRng::seed_from_u64(derive_seed(seed, parts))
}

/// A generator seeded directly.
pub fn seeded(seed: u64) -> ChipRng {
    ChipRng::seed_from_u64(seed)
}

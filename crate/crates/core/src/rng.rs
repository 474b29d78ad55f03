//! Seed derivation. Every random quantity in the crate comes from a ChaCha
//! stream selected by `(seed, stream index)`, so work can be split across
//! threads in any order without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Independent stream `index` of the generator keyed by `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives a child seed; used when a trial needs its own family of streams
/// (e.g. a fresh measurement ensemble per Monte Carlo trial).
pub fn child_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined key
    let mut z = seed
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

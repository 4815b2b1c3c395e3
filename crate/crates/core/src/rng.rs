//! Deterministic seeding.
//!
//! Every parallel loop in the crate gives work item `i` its own generator,
//! seeded with [`derive_substream`]`(master, i)`. Results therefore depend only
//! on the master seed and never on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer. A bijection on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for substream `index` of `master`.
///
/// Computes `mix64(mix64(master) + GOLDEN_GAMMA * (index + 1))` with wrapping
/// arithmetic. For a fixed master the inner argument is injective in `index`
/// (the multiplier is odd) and `mix64` is a bijection, so distinct indices never
/// collide. For a fixed index, distinct masters never collide either.
pub fn derive_substream(master: u64, index: u64) -> u64 {
    mix64(mix64(master).wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

pub fn substream_rng(master: u64, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_substream(master, index))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

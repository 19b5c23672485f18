//! Seeded randomness.
//!
//! All stochastic operations take a `u64` seed and expand it through
//! ChaCha12, so identical seeds give identical results on every platform.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// The RNG used throughout the crate.
pub type SeedRng = ChaCha12Rng;

/// Expand a `u64` seed into an RNG.
pub fn rng_from(seed: u64) -> SeedRng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Derive an independent stream from `(seed, tag)`.
///
/// Used where one user-facing seed drives several unrelated decisions
/// (batch shuffling vs. noise draws, per-shard streams, per-alpha attacks)
/// without any stream consuming draws meant for another.
pub fn derive(seed: u64, tag: u64) -> u64 {
    // splitmix64 over the combined value
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `len` i.i.d. standard normal draws.
pub fn normal_vec(rng: &mut SeedRng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Fisher-Yates shuffled `0..n`.
pub fn shuffled_indices(n: usize, rng: &mut SeedRng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(rng);
    indices
}

/// Rademacher (+1/-1) probe vector.
pub fn rademacher_vec(rng: &mut SeedRng, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

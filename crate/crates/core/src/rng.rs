//! Seeding for reproducible, parallel Monte-Carlo runs.
//!
//! Every random game or sampled run is driven by a `ChaCha8Rng` seeded from a
//! single `u64`. Per-trial seeds are derived from `(base seed, trial index)`
//! with the SplitMix64 finalizer, so trial `t` can be replayed on its own by
//! passing its derived seed straight back to [`rng_from_seed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn trial_seed(base: u64, trial: u64) -> u64 {
    splitmix64(base ^ splitmix64(trial))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

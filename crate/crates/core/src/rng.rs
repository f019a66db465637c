// SPDX-License-Identifier: Apache-2.0

//! Seeded, portable random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] seeded through
//! [`derive_seed`], so results depend only on the master seed and the stream
//! index, never on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for stream `index` under `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix(seed
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(mix(index.wrapping_add(1))))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Independent generator for stream `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> Rng {
    rng_from_seed(derive_seed(seed, index))
}

//! Seed derivation for independent random streams.
//!
//! Every consumer of randomness in the crate is seeded from a `u64`. Streams that
//! must never overlap (training data, test data, initialization, shuffling) are
//! derived from a base seed with [`derive`], which mixes the base and a stream
//! tag through the SplitMix64 finalizer.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Stream tags used across the crate.
pub mod stream {
    pub const FAMILY: u64 = 0x0001;
    pub const TRAIN_DATA: u64 = 0x0010;
    pub const TEST_DATA: u64 = 0x0020;
    pub const INIT: u64 = 0x0030;
    pub const BATCH_ORDER: u64 = 0x0040;
    pub const SHUFFLE: u64 = 0x0050;
    pub const SUBCLASS: u64 = 0x0100;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed of sub-stream `tag` from `base`.
pub fn derive(base: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(base) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// The generator used for every stream. ChaCha output is platform independent.
pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

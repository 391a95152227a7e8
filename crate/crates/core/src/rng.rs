//! Seeded generators shared by all simulations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives an independent child seed from `(seed, stream, index)`.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(stream)).wrapping_add(index))
}

pub fn rng_for(seed: u64, stream: u64, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, stream, index))
}

/// Stream ids. Keeping arrivals and measurements on separate streams lets
/// runs that differ only in policy see the same traffic and the same
/// measurement randomness per message.
pub mod stream {
    pub const TRAFFIC: u64 = 1;
    pub const MEASUREMENT: u64 = 2;
    pub const DATASET: u64 = 3;
}

//! Keyed random substreams.
//!
//! Every random draw in a run comes from a stream keyed by the run seed plus
//! a tuple such as (entity, day, purpose). Streams are therefore independent
//! of iteration order and thread scheduling, and any single draw can be
//! replayed in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream purposes. Distinct values keep substreams for the same
/// (entity, day) disjoint.
pub mod purpose {
    pub const DECISION: u64 = 1;
    pub const FEATURES: u64 = 2;
    pub const OUTCOME: u64 = 3;
    pub const DECAY: u64 = 4;
    pub const RESERVOIR: u64 = 5;
    pub const MPC_SAMPLE: u64 = 6;
    pub const POPULATION: u64 = 7;
    pub const EXPLORATION: u64 = 8;
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a key tuple into one 64-bit seed.
pub fn derive_seed(seed: u64, key: &[u64]) -> u64 {
    key.iter().fold(mix64(seed), |acc, &k| mix64(acc ^ mix64(k)))
}

pub fn substream(seed: u64, key: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, key))
}

/// Uniform in `[0, 1)` derived from a key without constructing a stream.
pub fn keyed_unit(seed: u64, key: &[u64]) -> f64 {
    (derive_seed(seed, key) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

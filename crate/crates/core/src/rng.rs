//! Reproducible random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha12 generator
//! addressed by `(seed, experiment, replicate)`. The key is derived from the
//! seed and the experiment id, and the replicate selects the ChaCha stream.
//! ChaCha is counter based, so streams are independent of scheduling and a
//! replicate produces the same numbers whether it runs on one thread or many.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Generator type used throughout the crate.
pub type StreamRng = ChaCha12Rng;

/// Experiment ids used by the built-in studies. Distinct ids keep the
/// streams of different studies disjoint under a common seed.
pub mod experiment {
    pub const DATA: u64 = 1;
    pub const CHERNOFF: u64 = 2;
    pub const SLOW_LIMIT: u64 = 3;
    pub const BOUNDARY_LIMIT: u64 = 4;
    pub const L1_FAST_LIMIT: u64 = 5;
    pub const COV_INTEGRAL: u64 = 6;
    pub const ARGMIN_SCALED: u64 = 7;
    pub const BROWNIAN: u64 = 8;
    pub const BOOTSTRAP: u64 = 9;
    pub const CANDIDATES: u64 = 10;
}

fn mix(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for replicate `replicate` of experiment `experiment`.
pub fn stream(seed: u64, experiment: u64, replicate: u64) -> StreamRng {
    let mut key = [0u8; 32];
    let words = [
        mix(seed),
        mix(seed ^ 0x9e37_79b9_7f4a_7c15),
        mix(experiment.wrapping_add(0x6a09_e667_f3bc_c908)),
        mix(seed.rotate_left(17) ^ experiment),
    ];
    for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    let mut rng = ChaCha12Rng::from_seed(key);
    rng.set_stream(replicate);
    rng
}

/// Derive a child seed, used when one study hands seeds to sub-batches.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix(seed ^ mix(tag.wrapping_add(0x3c6e_f372_fe94_f82b)))
}

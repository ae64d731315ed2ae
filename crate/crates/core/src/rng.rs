//! Seed derivation.
//!
//! Every random quantity in a generated signal comes from a ChaCha8 stream
//! whose seed is derived from the root seed through [`child_seed`]. A child
//! seed depends only on the parent seed and a stream tag, so new streams can
//! be added without perturbing existing ones, and signals can be rendered in
//! any order or in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags for the per-signal subsystems.
pub mod stream {
    pub const WAVEFORM: u64 = 1;
    pub const INTERVAL_PARAMS: u64 = 2;
    pub const INTERVALS: u64 = 3;
    pub const STEP: u64 = 4;
    pub const NOISE_CONFIG: u64 = 5;
    pub const NOISE: u64 = 6;
    pub const ARTIFACT: u64 = 7;
    pub const PAIR: u64 = 8;
}

/// Human-readable description of the derivation, stored in manifests.
pub const SEED_SCHEME: &str =
    "child = splitmix64(parent ^ splitmix64(tag + 0x9E3779B97F4A7C15)); signal k uses child(root, k); rng = ChaCha8Rng::seed_from_u64";

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn child_seed(parent: u64, tag: u64) -> u64 {
    splitmix64(parent ^ splitmix64(tag.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

/// Seed of signal `index` in a batch rooted at `root`.
pub fn signal_seed(root: u64, index: u64) -> u64 {
    child_seed(root, index)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

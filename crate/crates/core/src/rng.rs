//! Seeding helpers shared by every randomized step.
//!
//! All randomness flows from a user seed plus a fixed stream tag, so results
//! do not depend on thread scheduling or platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer. Used as a counter-based generator: the same input
/// always yields the same 64 bits.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a stream tag and an index into one well-spread word.
#[inline]
pub fn mix(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ index)
}

/// A ChaCha stream derived from `(seed, stream, index)`.
pub fn stream_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, stream, index))
}

/// Deterministic fair coin for `(seed, stream, index)`.
#[inline]
pub fn coin(seed: u64, stream: u64, index: u64) -> bool {
    mix(seed, stream, index) >> 63 == 1
}

/// Stream tags. Distinct constants keep independent uses uncorrelated.
pub mod streams {
    pub const PAIR_SLOTS: u64 = 0x5107;
    pub const TIE_BREAK: u64 = 0x71E0;
    pub const CV_SPLIT: u64 = 0xC5A1;
    pub const VALIDATION: u64 = 0x7A11;
    pub const SHUFFLE: u64 = 0x5AFF;
    pub const INIT: u64 = 0x1417;
    pub const PROJECTION: u64 = 0x9E0C;
    pub const EARLIER: u64 = 0xEA71;
    pub const SESSION: u64 = 0x5E55;
    pub const GRADCHECK: u64 = 0x62AD;
    pub const DAY_PAIRS: u64 = 0xDA75;
    pub const MARKET: u64 = 0x3A4E;
    pub const IMAGE: u64 = 0x1A6E;
    pub const COMMUNITY: u64 = 0xC044;
}

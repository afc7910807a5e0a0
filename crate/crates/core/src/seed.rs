//! Deterministic seed derivation for parallel replicates.
//!
//! Replicate k of a run with master seed `s` always uses
//! `derive_seed(s, k)`, regardless of how the replicates are scheduled, so
//! results are identical for any worker count.

/// SplitMix64 finalizer; a full-period 64-bit mixer.
#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replicate `index` of a run seeded with `seed`.
///
/// The index is spread by a 64-bit odd constant before mixing so that
/// consecutive indices land far apart.
#[inline]
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Domain tag separating bootstrap streams from replicate-data streams
/// drawn from the same master seed.
pub const BOOTSTRAP_DOMAIN: u64 = 0x626F_6F74_7374_7261; // "bootstra"

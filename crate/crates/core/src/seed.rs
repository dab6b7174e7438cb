//! Seed derivation and the crate-wide PRNG.
//!
//! Every random stream is a [`ChaCha8Rng`] seeded from a `u64`. Sub-streams are
//! derived with the SplitMix64 finaliser applied to `parent ^ tag`, so a single
//! global seed fans out to independent, reproducible per-stage and per-task
//! streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a numeric tag.
pub fn derive(parent: u64, tag: u64) -> u64 {
    splitmix64(parent ^ splitmix64(tag))
}

/// Derives a child seed from a parent seed and a string label (stage names).
pub fn derive_str(parent: u64, label: &str) -> u64 {
    // FNV-1a over the label bytes, then mixed with the parent.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    derive(parent, h)
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

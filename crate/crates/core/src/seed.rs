//! Deterministic derivation of independent RNG seeds from one root seed.
//!
//! `derive(root, label, index)` hashes the stream label with 64-bit FNV-1a,
//! then mixes `root`, the label hash and `index` through SplitMix64:
//!
//! ```text
//! seed = mix(mix(root ^ fnv1a(label)) ^ index)
//! ```
//!
//! Labels name the consumer (`"split"`, `"forest"`, `"corpus"`, ...) and the
//! index selects a replicate, fold or cascade.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(label: &str) -> u64 {
    label
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// SplitMix64 finaliser.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(root: u64, label: &str, index: u64) -> u64 {
    mix(mix(root ^ fnv1a(label)) ^ index)
}

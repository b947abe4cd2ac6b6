//! Seed plumbing: one PRNG family (ChaCha12) everywhere, with sub-seeds
//! derived by mixing so the policy stream, the stream shuffle, and each
//! system's internal randomness never alias.

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub(crate) fn mix_seeds(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b))
}

/// Deterministic sub-seed for a named purpose under a base run seed.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    let mut acc = splitmix64(base);
    for &byte in tag.as_bytes() {
        acc = splitmix64(acc ^ u64::from(byte));
    }
    acc
}

//! Deterministic derivation of per-block RNG seeds from a master seed.
//!
//! Every randomized search gets a seed that depends only on the master
//! seed, the iteration number, and the block coordinates, so runs are
//! reproducible regardless of thread scheduling.

/// SplitMix64 finalizer; full avalanche on 64 bits.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds the tags into the master seed, order-sensitively.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut h = mix(master);
    for &t in tags {
        h = mix(h ^ mix(t));
    }
    h
}

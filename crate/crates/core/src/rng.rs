//! Seed plumbing. Every random draw in the crate comes from a ChaCha stream
//! derived from an explicit seed and a stream name, so independent consumers
//! (initialization, shuffling, k-means, splits) never share a sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Derives a child seed from a parent seed and a stream name.
pub fn sub_seed(seed: u64, name: &str) -> u64 {
    // FNV-1a over the name, then one splitmix64 finalizer over the combination.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Same as [`sub_seed`] with an additional integer index folded in.
pub fn sub_seed_indexed(seed: u64, name: &str, index: u64) -> u64 {
    sub_seed(sub_seed(seed, name), alloc::format!("#{index}").as_str())
}

pub fn rng_from(seed: u64, name: &str) -> Rng {
    Rng::seed_from_u64(sub_seed(seed, name))
}

//! Seed derivation and chunked, thread-count independent sampling.
//!
//! Every random stream is derived from a root seed plus a label (or a chunk
//! index), so adding a stage to a pipeline never perturbs the other stages.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Samples per chunk. Changing this changes every sampled stream.
pub const CHUNK_SIZE: usize = 1 << 15;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable labeled seed derivation (FNV-1a over the label, mixed with splitmix64).
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = FNV_OFFSET ^ splitmix64(seed);
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

/// Seed for the `index`-th sub-stream of `seed`.
pub fn derive_indexed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Splits `count` draws into fixed-size chunks, each with its own RNG seeded
/// by `(seed, chunk index)`, and runs them in parallel. The returned per-chunk
/// results are in chunk order, independent of the thread count.
pub fn chunked<T, F>(count: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let chunks = count.div_ceil(CHUNK_SIZE);
    (0..chunks)
        .into_par_iter()
        .map(|k| {
            let len = if k + 1 == chunks {
                count - k * CHUNK_SIZE
            } else {
                CHUNK_SIZE
            };
            let mut rng = rng_from(derive_indexed(seed, k as u64));
            f(&mut rng, len)
        })
        .collect()
}

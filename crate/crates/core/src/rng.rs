//! Counter-based seeding.
//!
//! Every random draw in the crate is addressed by a `(master_seed, stream, index)`
//! triple and gets its own ChaCha8 generator keyed by that triple. Results are
//! therefore independent of how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// A named stream of reproducible generators under one master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeedStream {
    pub master: u64,
    pub stream: u64,
}

impl SeedStream {
    pub const fn new(master: u64, stream: u64) -> Self {
        Self { master, stream }
    }

    /// Generator for draw number `index` of this stream.
    pub fn rng_at(&self, index: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master.to_le_bytes());
        key[8..16].copy_from_slice(&self.stream.to_le_bytes());
        key[16..24].copy_from_slice(&index.to_le_bytes());
        key[24..].copy_from_slice(b"outcr-v1");
        ChaCha8Rng::from_seed(key)
    }

    /// Derived stream, used to give sub-computations disjoint randomness.
    pub fn substream(&self, tag: u64) -> SeedStream {
        let mixed = splitmix64(self.stream ^ splitmix64(tag.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        SeedStream::new(self.master, mixed)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Chunk length used by every parallel reduction. Fixed so that floating-point
/// sums are associated identically for any worker count.
pub const REDUCE_CHUNK: usize = 1024;

/// Sum `f(i)` for `i in 0..count` in parallel with a worker-count independent
/// association order.
pub fn det_sum<F>(count: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = count.div_ceil(REDUCE_CHUNK);
    let partials: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * REDUCE_CHUNK;
            let hi = (lo + REDUCE_CHUNK).min(count);
            (lo..hi).map(&f).sum::<f64>()
        })
        .collect();
    partials.iter().sum()
}

/// Parallel count of indices satisfying `pred`.
pub fn par_count<F>(count: usize, pred: F) -> usize
where
    F: Fn(usize) -> bool + Sync,
{
    (0..count).into_par_iter().filter(|&i| pred(i)).count()
}

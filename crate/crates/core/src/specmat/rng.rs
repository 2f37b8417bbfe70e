//! Seeded, platform-independent random streams.
//!
//! Every stream is a ChaCha8 generator keyed by a 64-bit seed. Parallel work
//! derives per-task seeds with [`split_seed`], a SplitMix64 finaliser applied
//! to `seed ^ golden * (index + 1)`, so task `i` of a sweep always sees the
//! same numbers no matter how tasks are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of child stream `index` from a parent seed.
pub fn split_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ GOLDEN.wrapping_mul(index.wrapping_add(1)))
}

/// Single-owner random stream.
#[derive(Debug, Clone)]
pub struct RngHandle {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngHandle {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of child streams handed out so far.
    pub fn stream_counter(&self) -> u64 {
        self.stream
    }

    /// Hands out the next child stream. Independent of how many numbers were
    /// drawn from `self`.
    pub fn split(&mut self) -> RngHandle {
        let child = RngHandle::new(split_seed(self.seed, self.stream));
        self.stream += 1;
        child
    }

    /// Child stream `index` without advancing the counter.
    pub fn child(&self, index: u64) -> RngHandle {
        RngHandle::new(split_seed(self.seed, index))
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// `k` distinct indices from `0..n` (partial Fisher-Yates), in draw order.
    pub fn sample_without_replacement(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot draw {k} of {n} without replacement");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = RngHandle::new(42);
        let mut b = RngHandle::new(42);
        for _ in 0..100 {
            assert_eq!(a.normal().to_bits(), b.normal().to_bits());
        }
    }

    #[test]
    fn split_is_independent_of_draws() {
        let mut a = RngHandle::new(7);
        let mut b = RngHandle::new(7);
        let _ = b.normal();
        assert_eq!(a.split().normal().to_bits(), b.split().normal().to_bits());
        assert_eq!(a.stream_counter(), 1);
        assert_ne!(split_seed(7, 0), split_seed(7, 1));
    }

    #[test]
    fn without_replacement_is_distinct() {
        let mut r = RngHandle::new(3);
        let mut s = r.sample_without_replacement(50, 50);
        s.sort_unstable();
        assert_eq!(s, (0..50).collect::<Vec<_>>());
    }
}

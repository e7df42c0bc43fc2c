//! Project-wide seeded random number generation.
//!
//! Every stochastic routine takes a [`SeededRng`]. The generator is ChaCha8,
//! a counter-based stream cipher: output depends only on `(seed, stream,
//! word position)`, so streams are identical on every platform and
//! independent sub-streams can be carved out with [`SeededRng::substream`].

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ALGORITHM: &str = "chacha8";

#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// An independent generator on the same seed but a different ChaCha stream.
    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Stream tags used when a run derives sub-generators from its master seed.
pub mod streams {
    pub const SCENARIO: u64 = 1;
    pub const SYNTH: u64 = 2;
    pub const BINARIZER: u64 = 3;
    pub const TRAIN: u64 = 4;
    pub const MEMORY: u64 = 5;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_seeds_equal_streams() {
        let mut a = SeededRng::new(42);
        let mut b = SeededRng::new(42);
        for _ in 0..1_000_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn substreams_differ() {
        let mut a = SeededRng::substream(7, 1);
        let mut b = SeededRng::substream(7, 2);
        let xs: Vec<u64> = (0..4).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        assert_ne!(xs, ys);
    }

    const PINNED_SEED0: u64 = 13_080_132_717_333_068_652;

    #[test]
    fn stream_is_pinned() {
        // Guards against silent generator changes; the file formats and
        // reproducibility guarantees depend on this exact sequence.
        let first = SeededRng::new(0).next_u64();
        assert_eq!(first, PINNED_SEED0);
        assert_eq!(first, ChaCha8Rng::seed_from_u64(0).next_u64());
        assert_ne!(first, SeededRng::new(1).next_u64());
    }
}

//! Deterministic seed derivation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a label.
pub fn derive(seed: u64, label: u64) -> u64 {
    mix(mix(seed) ^ label.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Independent streams split from one root seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStreams {
    pub root: u64,
}

impl SeedStreams {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn data(&self) -> u64 {
        derive(self.root, 1)
    }

    pub fn init(&self) -> u64 {
        derive(self.root, 2)
    }

    pub fn gumbel(&self) -> u64 {
        derive(self.root, 3)
    }

    pub fn tuner(&self) -> u64 {
        derive(self.root, 4)
    }

    /// Streams for one fold of a cross-validation run.
    pub fn fold(&self, fold: usize) -> SeedStreams {
        SeedStreams::new(derive(self.root, 1000 + fold as u64))
    }
}

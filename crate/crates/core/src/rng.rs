//! Seeded generators. Every consumer draws from its own ChaCha stream so
//! adding draws in one stage never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub mod stream {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const CENTERS: u64 = 3;
    pub const TRAIN_SPLIT: u64 = 4;
    pub const POOL_SPLIT: u64 = 5;
    pub const TEST_SPLIT: u64 = 6;
    pub const HOLDOUT: u64 = 7;
    pub const RANDOM_SCORE: u64 = 8;
}

pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

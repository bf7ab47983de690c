//! Seeded random streams. Every stream derives from one seed, so each
//! stage of a run can be reproduced without replaying the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed used when neither `--seed` nor `CKDE_SEED` is given.
pub const DEFAULT_SEED: u64 = 20_190_519;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Corpus = 1,
    Sampling = 2,
    Validation = 3,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

//! Seeded random streams.
//!
//! Every consumer of randomness (initialization, dropout, alignment noise,
//! data sampling) draws from its own stream derived from the run seed, so
//! changing how often one consumer draws never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    Dropout = 2,
    Noise = 3,
    Sampling = 4,
    Data = 5,
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, which: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

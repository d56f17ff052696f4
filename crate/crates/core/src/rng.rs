//! Seeded random streams. Each purpose draws from its own ChaCha8 stream of
//! the run seed, so changing one use (say the residual points) never shifts another.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Network = 0,
    RateNetwork = 1,
    ResidualPoints = 2,
    Observations = 3,
    Refinement = 4,
}

pub fn stream(seed: u64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

/// A `u64` seed for APIs that take one (network initialisation).
pub fn derived_seed(seed: u64, purpose: Stream) -> u64 {
    if purpose == Stream::Network {
        return seed;
    }
    stream(seed, purpose).next_u64()
}

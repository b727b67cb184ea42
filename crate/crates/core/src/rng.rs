//! Named random streams derived from the mission seed.
//!
//! Each consumer gets its own ChaCha stream, so adding draws to one never
//! shifts the values another sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Sensors = 1,
    Radio = 2,
    Bus = 3,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

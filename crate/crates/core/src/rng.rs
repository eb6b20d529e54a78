//! Seeded, stream-split random number generation.
//!
//! Every run owns a ChaCha8 generator keyed by `(seed, stream)`. ChaCha is
//! counter-based, so distinct streams under one seed are independent and any
//! trial can be replayed without replaying the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

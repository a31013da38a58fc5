//! Seeded random streams.
//!
//! Every unit of parallel work (a simulation replica, a chunk of bootstrap
//! resamples) draws from its own ChaCha8 stream selected by index, so results
//! depend only on `(seed, index)` and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

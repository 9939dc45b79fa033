//! Seeded random sub-streams.
//!
//! Every stage draws from its own ChaCha stream keyed by the same master
//! seed, so re-seeding one stage never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Scene = 1,
    Receivers = 2,
    Split = 3,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

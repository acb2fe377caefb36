//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha20 stream selected by the
//! root seed, a replica index and a purpose tag, so Monte Carlo replicas can
//! run in any order or in parallel and still reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// What a stream is used for. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Noise = 1,
    InitialCondition = 2,
    Perturbation = 3,
    Control = 4,
    Sampling = 5,
}

/// The stream for `(seed, replica, purpose)`.
pub fn stream(seed: u64, replica: u64, purpose: Purpose) -> ChaCha20Rng {
    assert!(replica < 1 << 48, "replica index out of range");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) | replica);
    rng
}

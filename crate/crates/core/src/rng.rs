//! Seeded randomness.
//!
//! Every stochastic routine in this crate draws from [`SeededRng`], which is
//! ChaCha8 (via `rand_chacha`) keyed from a `u64` seed. ChaCha output is
//! platform independent, so synthetic corpora and initializations reproduce
//! bit-for-bit across machines for a given crate version.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for a sub-task (e.g. one seed per epoch).
pub fn derive(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

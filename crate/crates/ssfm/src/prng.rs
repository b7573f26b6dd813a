//! Deterministic stream seeding. Every random source in a run (symbols per
//! carrier and polarisation, noise per amplifier stage) draws from its own
//! ChaCha stream, keyed by a purpose tag, the master seed and its indices.
//! Twin runs that share a master seed therefore share their symbol streams
//! exactly, whether or not noise is enabled.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

pub fn stream(purpose: &str, master_seed: u64, indices: &[u64]) -> ChaCha12Rng {
    let mut h = Sha256::new();
    h.update(purpose.as_bytes());
    h.update(master_seed.to_le_bytes());
    for ix in indices {
        h.update(ix.to_le_bytes());
    }
    ChaCha12Rng::from_seed(h.finalize().into())
}

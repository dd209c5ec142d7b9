//! Named, reproducible random-number streams.
//!
//! A single master seed expands into independent substreams, one per purpose
//! ("geometry", "fading", "noise", "data", ...). Substreams are derived by
//! hashing the master seed together with the stream name, so adding a new
//! consumer never perturbs the draws seen by existing ones, and components
//! that must be compared fairly (for example two selection methods facing the
//! same channel realization) can re-derive identical streams independently of
//! each other and of scheduling order.

use rand_chacha::ChaCha12Rng;
use rand_chacha::rand_core::SeedableRng;
use sha2::{Digest, Sha256};

/// Derives independent substreams from one master seed.
#[derive(Clone, Copy, Debug)]
pub struct StreamFactory {
    master: u64,
}

impl StreamFactory {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Returns the substream for `name`. The same (seed, name) pair always
    /// yields the same generator, and distinct names yield streams with
    /// unrelated states.
    pub fn stream(&self, name: &str) -> ChaCha12Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.master.to_le_bytes());
        hasher.update([0u8]);
        hasher.update(name.as_bytes());
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha12Rng::from_seed(seed)
    }
}

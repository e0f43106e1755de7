//! Labelled deterministic random streams.
//!
//! Every random draw in an experiment comes from an [`RngStream`] keyed by
//! `(seed, label)`. Child streams are derived by extending the label, so the
//! streams of different trials or subsystems never overlap and each can be
//! replayed on its own.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    label: String,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, label: impl Into<String>) -> Self {
        let label = label.into();
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update(label.as_bytes());
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        RngStream {
            seed,
            label,
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    /// Independent stream labelled `"{self.label}/{name}"`.
    ///
    /// Depends only on the parent's seed and label, never on how many draws
    /// the parent has made.
    pub fn derive(&self, name: &str) -> RngStream {
        RngStream::new(self.seed, format!("{}/{}", self.label, name))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

//! Splittable, counter-based random streams.
//!
//! Every random quantity in the crate is drawn from a [`StreamRng`] obtained
//! from a [`StreamKey`]. Keys form a tree rooted at a master seed; a child key
//! is the SHA-256 digest of its parent and a label, so sibling streams never
//! overlap and a stream's content does not depend on which other streams were
//! consumed first.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha20Rng;

/// Sub-stream labels shared across the crate.
pub mod labels {
    pub const INITIAL_CONDITION: &str = "initial-condition";
    pub const STATE_INNOVATIONS: &str = "state-innovations";
    pub const OBSERVATION_NOISE: &str = "observation-noise";
    pub const PARTICLE_RESAMPLING: &str = "particle-resampling";
    pub const PARTICLE_PROPAGATION: &str = "particle-propagation";
    pub const TRAINING: &str = "training";
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    digest: [u8; 32],
}

impl StreamKey {
    pub fn new(master_seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"gridfilter/root");
        h.update(master_seed.to_le_bytes());
        Self {
            digest: h.finalize().into(),
        }
    }

    pub fn child(&self, label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(self.digest);
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        Self {
            digest: h.finalize().into(),
        }
    }

    pub fn index(&self, i: u64) -> Self {
        let mut h = Sha256::new();
        h.update(self.digest);
        h.update(b"#");
        h.update(i.to_le_bytes());
        Self {
            digest: h.finalize().into(),
        }
    }

    pub fn rng(&self) -> StreamRng {
        StreamRng::from_seed(self.digest)
    }
}

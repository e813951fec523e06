//! Deterministic hierarchical random streams.
//!
//! All stochastic code derives its randomness from one master seed through
//! labeled substreams: particle i of an ensemble, replication r of a
//! mission, window w of a perturbation process each get their own stream.
//! Because a stream's key depends only on the label path from the root,
//! results are bitwise identical no matter the evaluation order or thread
//! count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer. Decorrelates adjacent keys and labels.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A node in a tree of reproducible random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomStream {
    key: u64,
}

impl RandomStream {
    /// Root of the stream tree for a given master seed.
    pub fn root(master_seed: u64) -> Self {
        RandomStream { key: mix(master_seed) }
    }

    /// Child stream. Children with distinct labels are decorrelated; the
    /// same label always yields the same child.
    pub fn substream(&self, label: u64) -> Self {
        RandomStream { key: mix(self.key ^ mix(label)) }
    }

    /// Fresh generator seeded at this node.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.key)
    }
}

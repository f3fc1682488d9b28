//! Deterministic random streams.
//!
//! Every stochastic computation draws from a [`Stream`] derived from a master
//! seed and a path of task identifiers (row, replicate, ...). Derivation is a
//! pure function of its inputs, so parallel tasks never share a generator and
//! results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type Stream = ChaCha12Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Root of a tree of substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    pub master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    /// Seed of the substream reached by following `path` from the root.
    pub fn derive_seed(&self, path: &[u64]) -> [u8; 32] {
        let mut h = splitmix64(self.master);
        for &p in path {
            h = splitmix64(h ^ splitmix64(p.wrapping_add(0x632b_e59b_d9b4_e019)));
        }
        let mut seed = [0u8; 32];
        let mut x = h;
        for chunk in seed.chunks_mut(8) {
            x = splitmix64(x);
            chunk.copy_from_slice(&x.to_le_bytes());
        }
        seed
    }

    pub fn stream(&self, path: &[u64]) -> Stream {
        Stream::from_seed(self.derive_seed(path))
    }
}

/// Convenience for single-stream callers.
pub fn stream_from_seed(seed: u64) -> Stream {
    SeedTree::new(seed).stream(&[])
}

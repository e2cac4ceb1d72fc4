//! Seed derivation and content hashing.
//!
//! Every randomized computation in the crate takes an explicit `u64`
//! seed. Sub-computations (bootstrap replicates, folds, fixture draws)
//! derive their own seeds through [`derive_seed`] so that work items are
//! independent of execution order and worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; the standard 64-bit mixer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a root seed and a stream index.
pub fn derive_seed(root: u64, index: u64) -> u64 {
    mix(mix(root) ^ mix(index.wrapping_add(0x51ed_270b)))
}

/// Seeded RNG used throughout the crate. ChaCha has a stable stream
/// across platforms and rand releases, unlike `StdRng`.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// FNV-1a over a byte slice. Used for content hashes of rows so fold
/// assignment can be made independent of row order.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Incremental FNV-1a hasher for heterogeneous cell values.
#[derive(Clone)]
pub struct ContentHasher {
    state: u64,
}

impl ContentHasher {
    pub fn new() -> Self {
        Self {
            state: 0xcbf2_9ce4_8422_2325,
        }
    }

    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.state ^= b as u64;
            self.state = self.state.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn update_f64(&mut self, v: f64) {
        self.update(&v.to_bits().to_le_bytes());
    }

    pub fn finish(&self) -> u64 {
        self.state
    }
}

impl Default for ContentHasher {
    fn default() -> Self {
        Self::new()
    }
}

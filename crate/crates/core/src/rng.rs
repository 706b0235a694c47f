//! Deterministic random streams for parallel Monte Carlo.
//!
//! Every unit of parallel work (a simulated population, a bootstrap
//! replicate) gets its own ChaCha8 generator keyed by `(master seed, index)`.
//! Results therefore depend only on the master seed, never on the schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A node in a tree of seeds. Children are derived by hashing the parent
/// seed with the child index, so sibling streams never overlap in practice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream(u64);

impl SeedStream {
    pub fn new(master: u64) -> Self {
        SeedStream(master)
    }

    pub fn seed(&self) -> u64 {
        self.0
    }

    pub fn child(&self, index: u64) -> SeedStream {
        SeedStream(splitmix64(splitmix64(self.0) ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019))))
    }

    /// Child stream for a named purpose (e.g. "oracle", "population").
    pub fn named(&self, label: &str) -> SeedStream {
        let h = label
            .bytes()
            .fold(0xCBF2_9CE4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01B3));
        self.child(h)
    }

    pub fn rng(&self) -> StreamRng {
        StreamRng::seed_from_u64(self.0)
    }
}

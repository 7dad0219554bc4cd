//! Seed handling shared by every stochastic component.
//!
//! All randomness flows from a user-visible 64-bit seed through [`ChaCha8Rng`],
//! so results are reproducible across platforms for a fixed seed. Sub-streams
//! (per community, per epoch, per model) are derived with [`derive_seed`]
//! instead of reusing the parent seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere in the crate.
pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer: a bijective 64-bit mix with full avalanche.
#[inline]
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for sub-stream `index` of `seed`: `seed ^ mix64(index)`.
#[inline]
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    seed ^ mix64(index)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Named sub-streams so the same user seed never drives two consumers.
pub(crate) mod stream {
    pub const MODEL_INIT: u64 = 0x6d6f_6465_6c00_0001;
    pub const SHUFFLE: u64 = 0x7368_7566_666c_6502;
    pub const INTER_COMMUNITY: u64 = 0x696e_7465_7200_0003;
    pub const BRIDGES: u64 = 0x6272_6964_6765_0004;
    pub const COMMUNITY_BASE: u64 = 0x636f_6d6d_0000_0000;
    pub const TEST_SPLIT: u64 = 0x7465_7374_0000_0005;
}

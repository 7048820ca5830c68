//! Counter-derived random streams: every (master seed, purpose, index)
//! triple maps to its own ChaCha8 stream, so results never depend on the
//! order in which workers pick up replicates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Purpose tags keep streams of different experiments apart.
pub mod tag {
    pub const INCREMENTS: u64 = 1;
    pub const JUMPS: u64 = 2;
    pub const BRIDGE: u64 = 3;
    pub const Z_DIFFUSION: u64 = 4;
    pub const MAIN_SDE: u64 = 5;
    pub const PARTICLES: u64 = 6;
    pub const BOOTSTRAP: u64 = 7;
    pub const BROWNIAN_CELLS: u64 = 8;
    pub const INITIAL_LAW: u64 = 9;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Stream for replicate `index` of purpose `tag` under `master`.
pub fn stream(master: u64, tag: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(master ^ splitmix64(tag)));
    rng.set_stream(index);
    rng
}

/// Deterministic 64-bit hash of several words; used for sub-seeds.
pub fn mix(words: &[u64]) -> u64 {
    words.iter().fold(0x243F_6A88_85A3_08D3, |h, &w| splitmix64(h ^ w))
}

//! Seeded random streams.
//!
//! Every stochastic component draws from a ChaCha8 stream keyed by a 64-bit
//! seed plus a 64-bit stream id. ChaCha is counter based, so streams with
//! distinct ids are independent and can be created in any order, which keeps
//! generation and rollouts reproducible regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids used by the library. Callers mix in their own indices with
/// [`derive`].
pub mod streams {
    pub const GENERATE: u64 = 0x67656e;
    pub const TRAIN_DATA: u64 = 0x747264;
    pub const TRAIN_ROLLOUT: u64 = 0x74726f;
    pub const INIT: u64 = 0x696e69;
    pub const SOLVE: u64 = 0x736f6c;
}

/// Deterministic rng for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes indices into a stream id (splitmix64 finalizer).
pub fn derive(base: u64, parts: &[u64]) -> u64 {
    let mut h = base ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = splitmix(h);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

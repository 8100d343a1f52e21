//! Seed splitting.
//!
//! Every random stream is a ChaCha8 keystream selected by `(seed, stream)`,
//! so a user's randomness depends only on the root seed and the user's index,
//! never on iteration order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream ids at the top of the `u64` range are reserved for protocol-wide
/// steps; user streams count up from zero.
pub const LEVEL_SHUFFLE_STREAM: u64 = u64::MAX;
pub const MESSAGE_SHUFFLE_STREAM: u64 = u64::MAX - 1;

pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives an independent child seed from `(seed, tag)` with a SplitMix64
/// finalizer.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

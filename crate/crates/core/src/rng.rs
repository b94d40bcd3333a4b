//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator (`rand_chacha::ChaCha8Rng`). The
//! 256-bit key is derived from the 64-bit master seed with
//! `SeedableRng::seed_from_u64` (a PCG32 expansion fixed by `rand_core`),
//! and the stream id is written into ChaCha's 64-bit stream (nonce) word.
//! Streams with different ids are therefore disjoint keystreams of the same
//! key, and the output depends only on `(master_seed, stream_id)`, never on
//! the platform or on the order in which streams are created or consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RngStream = ChaCha8Rng;

pub fn rng_stream(master_seed: u64, stream_id: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng
}

/// Derives a child seed from a parent seed and a key path (SplitMix64 mixing).
///
/// Used to give each `(grid point, replicate)` of a sweep its own master seed.
pub fn derive_seed(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(parent), |acc, &k| splitmix(acc ^ splitmix(k.wrapping_add(0x9E37_79B9_7F4A_7C15))))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

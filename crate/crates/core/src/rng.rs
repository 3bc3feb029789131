//! Seed derivation for reproducible parallel Monte Carlo.
//!
//! Every unit of work (session, block of rounds, scan point) owns a ChaCha
//! stream keyed by the user seed and a stream id, so results do not depend
//! on how work is distributed over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Rounds simulated per independent random stream inside one session.
pub const BLOCK_ROUNDS: u64 = 4096;

pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Stream id for a sub-unit of a unit, e.g. block `j` of session `i`.
pub fn child_id(parent: u64, child: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = parent
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(child)
        .wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

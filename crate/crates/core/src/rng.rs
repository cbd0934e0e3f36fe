//! Seedable, splittable random streams.
//!
//! Every run derives its generators from a single `u64` seed. A stream is a
//! ChaCha8 generator keyed by the seed with a distinct 64-bit stream id, so
//! streams never overlap and adding a new consumer does not perturb the others.
//!
//! Stream ids used across the crate:
//!
//! | consumer                          | stream id             |
//! |-----------------------------------|-----------------------|
//! | finite chain additions            | `FINITE_CHAIN`        |
//! | coupling, chain A / shared draws  | `COUPLING_A`          |
//! | coupling, chain B (independent)   | `COUPLING_B`          |
//! | initial configuration generation  | `INITIAL_CONFIG`      |
//! | replica `r` of a batch            | `REPLICA_BASE + r`    |
//! | seed of sweep grid point `i`      | `SWEEP_POINT_BASE + i`|

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const FINITE_CHAIN: u64 = 0;
pub const COUPLING_A: u64 = 1;
pub const COUPLING_B: u64 = 2;
pub const INITIAL_CONFIG: u64 = 3;
pub const REPLICA_BASE: u64 = 1 << 32;
pub const SWEEP_POINT_BASE: u64 = 1 << 48;

/// Generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Child seed `index` of `seed`: the first word of stream `SWEEP_POINT_BASE + index`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    use rand::RngCore;
    stream(seed, SWEEP_POINT_BASE + index).next_u64()
}

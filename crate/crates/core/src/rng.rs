//! Deterministic random streams.
//!
//! Data for trial `t`, iteration `n` comes from a ChaCha8 generator keyed by
//! the master seed, positioned on stream `t` at a fixed per-iteration offset,
//! so it is a pure function of `(seed, t, n)`. Node placement and other
//! scenario geometry draw from a separate lane so topology can be frozen
//! while data varies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 32-bit words reserved per iteration on a data stream.
const WORDS_PER_ITERATION: u128 = 1 << 32;

const PLACEMENT_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn data_stream(seed: u64, trial: u64, iteration: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng.set_word_pos(iteration as u128 * WORDS_PER_ITERATION);
    rng
}

/// Stream for one whole trial when per-iteration addressing is not needed.
pub fn trial_stream(seed: u64, trial: u64) -> ChaCha8Rng {
    data_stream(seed, trial, 0)
}

pub fn placement_stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ PLACEMENT_SALT)
}

//! Seeded RNG streams.
//!
//! All randomness flows through ChaCha8 generators derived from a single
//! `u64` seed plus a stream id, so independent consumers (init, rollouts,
//! per-rollout evaluation) never interleave draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_ACTOR_INIT: u64 = 0;
pub const STREAM_CRITIC_INIT: u64 = 1;
pub const STREAM_TRAIN: u64 = 2;
/// Per-rollout evaluation streams start here; rollout `j` uses `STREAM_EVAL_BASE + j`.
pub const STREAM_EVAL_BASE: u64 = 1000;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

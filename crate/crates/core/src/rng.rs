//! Seeded random streams.
//!
//! Every stochastic consumer draws from its own ChaCha stream derived from
//! `(seed, stream)`, so adding draws in one place never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const STREAM_ENV: u64 = 1;
pub const STREAM_POLICY: u64 = 2;
pub const STREAM_INIT: u64 = 3;
pub const STREAM_BATCH: u64 = 4;
pub const STREAM_EVAL: u64 = 5;

pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

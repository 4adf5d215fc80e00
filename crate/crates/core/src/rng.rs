//! Seed splitting and per-purpose random streams.
//!
//! Realization `i` of a study with master seed `s` uses
//! `splitmix64(s + φ·(i + 1))` as its seed (φ the 64-bit golden-ratio
//! constant, wrapping arithmetic). Within a realization every purpose gets
//! its own ChaCha8 stream, so changing how many numbers one purpose consumes
//! never shifts another. That keeps paired comparisons (same seed, different
//! penetration) on common random numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn realization_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed.wrapping_add(GOLDEN.wrapping_mul(index.wrapping_add(1))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Placement = 1,
    Demand = 2,
    Weather = 3,
    Triggers = 4,
    Cascade = 5,
}

pub fn stream(seed: u64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

//! Per-chain random streams.
//!
//! Every chain owns one xoshiro256++ generator. Chain `c` of a multi-chain
//! invocation starts from `seed_from_u64(seed)` advanced by `c` calls to
//! `jump()` (2^128 steps each), so streams never overlap.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type ChainRng = Xoshiro256PlusPlus;

pub const GENERATOR_NAME: &str = "xoshiro256++ (rand_xoshiro), seed_from_u64 + jump per chain index";

pub fn chain_rng(seed: u64, chain_index: u32) -> ChainRng {
    let mut rng = ChainRng::seed_from_u64(seed);
    for _ in 0..chain_index {
        rng.jump();
    }
    rng
}

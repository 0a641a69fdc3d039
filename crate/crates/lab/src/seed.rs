//! Per-replication seeds.
//!
//! Replication `r` of sample size `n` under master seed `s` draws from a
//! ChaCha8 stream seeded with `mix(s, n, r)`, where
//! `mix(s, n, r) = splitmix64(splitmix64(splitmix64(s) ^ n) ^ r)`. Limit
//! (normal-means) draws use `n = 0`. Any single replication can therefore
//! be regenerated without running the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One step of the splitmix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replication `rep` at sample size `n`.
pub fn mix(master: u64, n: u64, rep: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ n) ^ rep)
}

/// Generator for replication `rep` at sample size `n`.
pub fn replication_rng(master: u64, n: u64, rep: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(master, n, rep))
}

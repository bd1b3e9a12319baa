//! Deterministic seed derivation.
//!
//! Every parallel unit of work (episode, timestep, annealing run) draws from a
//! generator seeded by mixing the run seed with the unit's coordinates, so
//! output bytes do not depend on worker count or scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 64-bit finalizer from splitmix64.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a run seed with stream coordinates into a child seed.
pub fn derive_seed(run_seed: u64, stream: &[u64]) -> u64 {
    let mut h = mix(run_seed);
    for &v in stream {
        h = mix(h ^ v);
    }
    h
}

/// Child generator for the stream identified by `stream` under `run_seed`.
pub fn derived_rng(run_seed: u64, stream: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(run_seed, stream))
}

//! Seeded random streams.
//!
//! Every replicate draws from its own ChaCha stream keyed by `(seed, index)`,
//! so replicate `k` produces the same numbers regardless of how replicates are
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ReplicateRng = ChaCha8Rng;

/// RNG for replicate `index` of an experiment keyed by `seed`.
pub fn replicate_rng(seed: u64, index: u64) -> ReplicateRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives a child seed, used when one experiment drives several independent
/// sub-experiments (calibration, then simulation, ...).
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `f` for replicates `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_replicates<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Runs `f` for replicates `0..n`, collecting results in index order.
#[cfg(not(feature = "parallel"))]
pub fn map_replicates<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

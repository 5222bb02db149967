//! Reproducible per-replica random streams.
//!
//! Replica `i` of a run with master seed `s` always draws from ChaCha8 stream
//! `i` keyed by `s`, so results do not depend on how replicas are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type SimRng = ChaCha8Rng;

pub fn replica_rng(master_seed: u64, replica: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replica);
    rng
}

/// Runs `f(replica_index, rng)` for every replica on the current rayon pool and
/// returns the results in replica order.
pub fn run_replicas<T, F>(replicas: usize, master_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut SimRng) -> T + Sync,
{
    (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(master_seed, i as u64);
            f(i, &mut rng)
        })
        .collect()
}

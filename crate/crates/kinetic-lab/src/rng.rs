//! Deterministic RNG plumbing. Every replicate gets its own ChaCha8 stream
//! derived from (master seed, replicate index), so results are bit-identical
//! regardless of how many worker threads execute the replicates.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// RNG for one replicate: fixed key from the master seed, stream = replicate.
pub fn substream(master_seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replicate);
    rng
}

/// Map replicates 0..n in parallel, collecting results in replicate order.
/// Each replicate draws only from its own substream, so the output is a pure
/// function of (master_seed, n, f) and independent of the thread count.
pub fn par_map_replicates<T, F>(master_seed: u64, n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(master_seed, i);
            f(i, &mut rng)
        })
        .collect()
}

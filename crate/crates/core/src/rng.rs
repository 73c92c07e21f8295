//! Counter-based derivation of independent random streams.
//!
//! Every stream is keyed by the master seed plus a small tuple of counters
//! (restart index, frame index, cell index). Keys are folded through the
//! SplitMix64 finalizer and the result seeds a ChaCha8 generator, so a stream
//! depends only on its key and never on the order in which streams are used.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DOMAIN_RESTART: u64 = 0x6b6d_6561_6e73_0001;
const DOMAIN_CELL: u64 = 0x6365_6c6c_7300_0002;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into `seed` one word at a time.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Stream used by k-means restart `run`.
pub fn restart_rng(seed: u64, run: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[DOMAIN_RESTART, run]))
}

/// Stream used to sample the member for `cell` in animation frame `frame`.
pub fn cell_rng(seed: u64, frame: u64, cell: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[DOMAIN_CELL, frame, cell]))
}

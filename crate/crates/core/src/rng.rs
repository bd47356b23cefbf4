//! Deterministic random substreams.
//!
//! Every random quantity in the crate is drawn from a [`ChaCha8Rng`] whose
//! seed is derived from a root seed and a path of integer tags (scenario,
//! sample size, replicate, item, bootstrap draw, ...). Results therefore do
//! not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a root seed with a tag path into a new 64-bit seed.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(root), |acc, &tag| splitmix64(acc ^ splitmix64(tag)))
}

/// A generator for the substream identified by `path` under `root`.
pub fn substream(root: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, path))
}

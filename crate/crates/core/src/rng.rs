//! Seed derivation for independent, reproducible random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A generator determined by `seed` and a path of stream indices, e.g.
/// `(seed, [epoch, group])`. Streams with different paths are unrelated.
pub fn derive(seed: u64, path: &[u64]) -> Rng {
    let mut s = splitmix(seed);
    for &p in path {
        s = splitmix(s ^ splitmix(p.wrapping_add(0x51_7cc1_b727_220a)));
    }
    ChaCha8Rng::seed_from_u64(s)
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

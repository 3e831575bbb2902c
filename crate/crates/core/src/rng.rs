//! Seeded random streams.
//!
//! All randomness in a run flows from one `u64` seed. Each consumer asks for a
//! named sub-stream (and optionally an index inside it), so adding a new
//! consumer never shifts the numbers another consumer sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn fnv1a(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Sub-stream `name` of the run seeded by `seed`.
pub fn stream(seed: u64, name: &str) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(name));
    rng
}

/// Sub-stream `name`, item `index` (per object, per step, ...).
pub fn indexed(seed: u64, name: &str, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(index.wrapping_add(1))));
    rng.set_stream(fnv1a(name));
    rng
}

/// A plain `u64` seed for item `index` of sub-stream `name`.
pub fn derive_seed(seed: u64, name: &str, index: u64) -> u64 {
    splitmix(seed ^ fnv1a(name) ^ splitmix(index.wrapping_add(1)))
}

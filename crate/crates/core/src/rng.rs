//! Named random streams derived from one 64-bit seed.
//!
//! Every random consumer asks for its own stream by label, so adding a new
//! consumer never shifts the draws seen by existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed for the stream `label` under the master `seed`.
pub fn stream_seed(seed: u64, label: &str) -> u64 {
    splitmix64(seed ^ splitmix64(fnv1a(label.as_bytes())))
}

/// Deterministic generator for the stream `label` under `seed`.
pub fn stream(seed: u64, label: &str) -> StreamRng {
    StreamRng::seed_from_u64(stream_seed(seed, label))
}

/// Generator for the `index`-th item of a per-item family (e.g. one
/// trajectory of a dataset); independent of scheduling order.
pub fn indexed_stream(seed: u64, label: &str, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(splitmix64(stream_seed(seed, label).wrapping_add(index)))
}

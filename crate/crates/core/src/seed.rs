//! Seed derivation for independent replication streams.
//!
//! Replication `r` of grid point `g` draws from a stream keyed by
//! `(master_seed, hash(g), r)`, so adding grid points never shifts the
//! streams of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every stochastic component.
pub type SimRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// FNV-1a over the UTF-8 bytes of a grid key. Stable across platforms and
/// toolchains, unlike `std::hash`.
pub fn key_hash(key: &str) -> u64 {
    key.bytes().fold(0xcbf2_9ce4_8422_2325_u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn stream_seed(master: u64, key: &str, replication: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(key_hash(key))) ^ replication)
}

/// Seed for replication `replication` of a single-point experiment.
pub fn replication_seed(master: u64, replication: u64) -> u64 {
    stream_seed(master, "", replication)
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

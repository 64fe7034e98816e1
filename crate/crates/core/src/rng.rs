//! Seeded random substreams.
//!
//! Every random draw in a study comes from a stream keyed by the master seed
//! and a path of integers (scenario index, replicate index, purpose). Two
//! calls with the same key always yield the same stream, independent of the
//! order in which replicates are executed or how many workers run them.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type SimRng = ChaCha12Rng;

/// Purpose tags separating the independent draws made for one replicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Hazard = 1,
    Damage = 2,
    Perception = 3,
    Repair = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a 64-bit seed from a master seed and a key path.
pub fn derive_seed(master_seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master_seed), |acc, &k| splitmix64(acc ^ splitmix64(k.wrapping_add(0x632B_E59B_D9B4_E019))))
}

pub fn substream(master_seed: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master_seed, path))
}

/// Stream for scenario-level draws (intensity field, true damage).
pub fn scenario_stream(master_seed: u64, scenario: u64, purpose: Purpose) -> SimRng {
    substream(master_seed, &[scenario, purpose as u64])
}

/// Stream for replicate-level draws (perception, repair durations).
pub fn replicate_stream(master_seed: u64, scenario: u64, replicate: u64, purpose: Purpose) -> SimRng {
    substream(master_seed, &[scenario, replicate, purpose as u64])
}

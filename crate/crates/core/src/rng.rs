//! Seed derivation for reproducible campaigns.
//!
//! Every run gets its own seed hashed from `(master_seed, run_index)`, and
//! every subsystem inside a run draws from its own ChaCha stream keyed by
//! [`Stream`]. Adding draws in one subsystem never shifts another's sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Independent random streams within one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Topology = 1,
    Mobility = 2,
    Channel = 3,
    Beams = 4,
    Traffic = 5,
    Harq = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run_index` under `master_seed`.
pub fn run_seed(master_seed: u64, run_index: u32) -> u64 {
    splitmix64(splitmix64(master_seed) ^ u64::from(run_index).wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn stream(run_seed: u64, stream: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    rng.set_stream(stream as u64);
    rng
}

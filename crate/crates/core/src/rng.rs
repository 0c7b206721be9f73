//! Seed hierarchy.
//!
//! Every random consumer in a run gets its own generator derived from the
//! master seed, a stream tag, and an index (usually the interval). Toggling one
//! consumer therefore never shifts the draws seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type GameRng = ChaCha8Rng;

/// Named sub-streams of the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Users = 1,
    AdversaryInit = 2,
    AdversarySample = 3,
    AdversaryLabels = 4,
    AdversaryTrain = 5,
    AdversaryClassify = 6,
    ChallengerInit = 7,
    ChallengerSelect = 8,
    ChallengerTrain = 9,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a sub-seed from `(master, stream, index)`.
pub fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    let a = splitmix64(master ^ splitmix64(stream as u64));
    splitmix64(a ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn rng_from_seed(seed: u64) -> GameRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sub_rng(master: u64, stream: Stream, index: u64) -> GameRng {
    rng_from_seed(derive_seed(master, stream, index))
}

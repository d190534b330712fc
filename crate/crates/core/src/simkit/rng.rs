//! Counter-based random streams: every `(seed, trial, role)` triple owns an
//! independent ChaCha stream, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Role {
    CalibrationNoise = 0,
    CalibrationTrain = 1,
    Noise = 2,
    Train = 3,
    Target = 4,
}

const ROLE_COUNT: u64 = 8;

pub fn stream_rng(seed: u64, trial: u64, role: Role) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial.wrapping_mul(ROLE_COUNT).wrapping_add(role as u64));
    rng
}

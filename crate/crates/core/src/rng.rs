//! Per-trial random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the experiment seed
//! (`seed_from_u64`) with stream id `(trial << 2) | purpose`. Streams for
//! different trials or purposes never overlap, and a trial can be replayed
//! alone from `(seed, trial)`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Recorded next to the seed in every output.
pub const GENERATOR_NAME: &str = "chacha8";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Verifier group and target selection.
    Selection = 0,
    /// Measurement outcome sampling on the prover side.
    Physics = 1,
    /// Adversary correlation seed.
    Adversary = 2,
}

pub fn stream(seed: u64, trial: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((trial << 2) | purpose as u64);
    rng
}

/// Correlation seed handed to adversary strategies for one trial.
pub fn adversary_seed(seed: u64, trial: u64) -> u64 {
    stream(seed, trial, Purpose::Adversary).next_u64()
}

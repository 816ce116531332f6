//! Counter-keyed random streams.
//!
//! Every random quantity in an experiment is drawn from a generator derived
//! from `(master seed, purpose, agent, round)`, so regenerating any round is
//! independent of iteration order and of how many rounds were produced
//! before it.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What the derived stream feeds. The discriminant is part of the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    /// Regression matrix H entries.
    LossMatrix = 1,
    /// Regression noise vector entries.
    LossNoise = 2,
    /// Constraint matrix A entries.
    ConstraintMatrix = 3,
    /// Constraint offset vector entries.
    ConstraintOffset = 4,
    /// Communication graph edges.
    Graph = 5,
    /// Bandit exploration directions.
    Direction = 6,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a generator keyed by `(seed, purpose, agent, round)`.
pub fn stream_rng(seed: u64, purpose: StreamPurpose, agent: usize, round: usize) -> ChaCha8Rng {
    keyed_rng(seed, &[purpose as u64, agent as u64, round as u64])
}

/// Derives a sub-seed, e.g. one master seed per bandit repetition.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut state = seed ^ GOLDEN;
    let _ = splitmix64(&mut state);
    state ^= index.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    splitmix64(&mut state)
}

fn keyed_rng(seed: u64, key: &[u64]) -> ChaCha8Rng {
    let mut state = seed;
    let _ = splitmix64(&mut state);
    for &part in key {
        state ^= part.wrapping_mul(0xD6E8_FEB8_6659_FD93).rotate_left(29);
        let _ = splitmix64(&mut state);
    }
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

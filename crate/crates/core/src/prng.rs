//! Deterministic pseudorandomness.
//!
//! Every random choice in a packet flows from a [`SeedState`] advanced by the
//! splitmix64 recurrence. Sampling disciplines (bounded draws, subsets,
//! shuffles) are fully specified so that a packet replays bit-exactly on any
//! platform and in any language.

use serde::{Deserialize, Serialize};
use thiserror::Error;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrngError {
    #[error("bounded draw requires a positive bound")]
    ZeroBound,
    #[error("cannot sample {wanted} distinct indices from a universe of {universe}")]
    SubsetTooLarge { wanted: usize, universe: usize },
    #[error("packet indices start at 1")]
    ZeroPacketIndex,
}

/// splitmix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator state. Copying a state forks an identical stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedState {
    pub state: u64,
}

impl SeedState {
    pub const fn new(state: u64) -> Self {
        SeedState { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform draw from `[0, bound)` by rejection sampling.
    ///
    /// Draws above the largest multiple of `bound` representable in 64 bits
    /// are discarded and redrawn.
    pub fn bounded(&mut self, bound: u64) -> Result<u64, PrngError> {
        if bound == 0 {
            return Err(PrngError::ZeroBound);
        }
        // limit = 2^64 - (2^64 mod bound), computed in 128 bits so that a
        // zero remainder gives limit = 2^64 (never reject).
        let span = 1u128 << 64;
        let limit = span - (span % bound as u128);
        loop {
            let u = self.next_u64();
            if (u as u128) < limit {
                return Ok(u % bound);
            }
        }
    }

    /// `m` distinct indices from `[0, universe)` by partial Fisher-Yates on
    /// the identity array.
    pub fn sample_subset(&mut self, m: usize, universe: usize) -> Result<Vec<usize>, PrngError> {
        if m > universe {
            return Err(PrngError::SubsetTooLarge { wanted: m, universe });
        }
        let mut pool: Vec<usize> = (0..universe).collect();
        for i in 0..m {
            let j = i + self.bounded((universe - i) as u64)? as usize;
            pool.swap(i, j);
        }
        pool.truncate(m);
        Ok(pool)
    }

    /// Full Fisher-Yates shuffle in place: for `i` ascending, swap `i` with
    /// `i + bounded(len - i)`.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        let len = items.len();
        for i in 0..len {
            // len - i >= 1, so the draw cannot fail.
            let j = i + self.bounded((len - i) as u64).expect("positive bound") as usize;
            items.swap(i, j);
        }
    }
}

/// Per-problem initial seed, fixed once a problem has any completed work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProblemSeed(pub u64);

impl ProblemSeed {
    /// State for packet `index`: the `index`-th output of a generator
    /// started at the initial seed.
    pub fn packet_state(self, index: u64) -> Result<SeedState, PrngError> {
        derive_packet_state(self.0, index)
    }
}

/// Starts a generator at `seed`, calls it `index` times and returns the last
/// output as a fresh state.
pub fn derive_packet_state(seed: u64, index: u64) -> Result<SeedState, PrngError> {
    if index == 0 {
        return Err(PrngError::ZeroPacketIndex);
    }
    let mut gen = SeedState::new(seed);
    let mut out = 0;
    for _ in 0..index {
        out = gen.next_u64();
    }
    Ok(SeedState::new(out))
}

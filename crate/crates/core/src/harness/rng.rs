//! Deterministic per-trial random streams. Every (experiment, grid point,
//! trial, purpose) tuple gets its own generator derived by hashing the
//! tuple into a seed, so trial results never depend on execution order or
//! on which other estimators ran.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a derived stream feeds; keeps e.g. noise draws from shifting the
/// payload bits when one consumer changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lane {
    Channel,
    PayloadBits,
    Noise,
    DpnPayloadBits,
    DpnNoise,
}

impl Lane {
    fn tag(self) -> u64 {
        match self {
            Lane::Channel => 1,
            Lane::PayloadBits => 2,
            Lane::Noise => 3,
            Lane::DpnPayloadBits => 4,
            Lane::DpnNoise => 5,
        }
    }
}

/// One round of the splitmix64 output function.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash a tuple of words into one seed; order-sensitive.
pub fn mix(parts: &[u64]) -> u64 {
    let mut state = 0x243f_6a88_85a3_08d3; // arbitrary nonzero start
    let mut acc = 0u64;
    for &p in parts {
        state ^= p;
        acc ^= splitmix64(&mut state);
    }
    // one extra scramble so short tuples do not collide with prefixes
    state ^= parts.len() as u64;
    acc ^ splitmix64(&mut state)
}

/// Generator for one (seed, experiment, grid point, trial, lane) tuple.
pub fn trial_rng(seed: u64, experiment_tag: u64, point: u64, trial: u64, lane: Lane) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(&[seed, experiment_tag, point, trial, lane.tag()]))
}

//! Reproducible parallel randomness.
//!
//! Each trajectory draws from its own ChaCha stream selected by
//! `(root_seed, group, index)`. Streams are independent and the mapping is
//! injective, so aggregates never depend on worker count or scheduling
//! order. All uniform deviates are produced by explicit bit manipulation to
//! keep draws identical across platforms.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// SplitMix64 step; the standard seed expander.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn expand_seed(root: u64) -> [u8; 32] {
    let mut state = root;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Experiment groups keep stream indices disjoint across the different draws
/// an experiment makes from one root seed.
pub mod groups {
    pub const LINEAR_MC: u32 = 1;
    pub const LINEAR_SIM: u32 = 2;
    pub const HISTOGRAM: u32 = 3;
    pub const LV_SIM: u32 = 4;
    pub const EXIT: u32 = 5;
    pub const OSCILLATION: u32 = 6;
    pub const TRANSIENCE: u32 = 7;
    pub const SWEEP_BASE: u32 = 8;
}

/// Independent stream for trajectory `index` of experiment `group` under
/// `root_seed`. The (group, index) pair maps injectively onto the ChaCha
/// stream counter.
pub fn trajectory_rng(root_seed: u64, group: u32, index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(expand_seed(root_seed));
    rng.set_stream((u64::from(group) << 32) | u64::from(index));
    rng
}

/// Uniform draw in the open interval (0, 1); never returns an endpoint.
pub fn unit_open<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
}

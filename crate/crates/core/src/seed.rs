//! Seed derivation.
//!
//! Every random quantity is drawn from a stream whose seed is a pure
//! function of the master seed and a path of integer tags. The layout used by
//! the ensemble is
//!
//! ```text
//! master ─┬─ block b1 ─┬─ candidate b2 ── projection draw
//!         │            │                └─ base-classifier tie seed
//!         │            └─ ...
//!         └─ ...
//! ```
//!
//! so the result of a fit never depends on how blocks are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type Rng = ChaCha12Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed of `parent` for `tag`.
pub fn child(parent: u64, tag: u64) -> u64 {
    mix64(parent ^ mix64(tag.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Seed at the end of a tag path.
pub fn derive(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(parent, |s, &t| child(s, t))
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Tags for named sub-streams.
pub mod tag {
    pub const PROJECTIONS: u64 = 0x5052_4f4a;
    pub const TIES: u64 = 0x5449_4553;
    pub const SPLIT: u64 = 0x5350_4c54;
    pub const TRAIN: u64 = 0x5452_4e;
    pub const TEST: u64 = 0x5445_5354;
    pub const SUBSAMPLE: u64 = 0x5355_4253;
    pub const METHOD: u64 = 0x4d45_5448;
    pub const DIM: u64 = 0x4449_4d;
    pub const REPLICATE: u64 = 0x5245_504c;
}

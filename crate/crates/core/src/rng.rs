//! Reproducible random substreams.
//!
//! Each consumer of randomness (channel draws per slot, orthonormal bases per
//! candidate pair, warm-up slots) gets its own ChaCha stream derived from the
//! run seed, so results do not depend on evaluation order or thread count, and
//! every scheme sees the same channel sequence for a given seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    PretrainChannel,
    DataChannel,
    WarmupChannel,
    OrthoBasis,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::PretrainChannel => 0x5052_4554_5241_494e,
            Purpose::DataChannel => 0x4441_5441_4348_414e,
            Purpose::WarmupChannel => 0x5741_524d_5550_0001,
            Purpose::OrthoBasis => 0x4f52_5448_4f42_4153,
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The generator for substream `index` of `purpose` under `seed`.
pub fn substream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ purpose.tag()));
    rng.set_stream(index);
    rng
}

/// Seed for repetition `rep` of a run seeded with `base`.
pub fn repetition_seed(base: u64, rep: u64) -> u64 {
    base.wrapping_add(rep)
}

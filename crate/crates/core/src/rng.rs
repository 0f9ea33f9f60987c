//! Counter-based splitting of a master seed into independent random streams.
//!
//! Every stochastic piece of a run draws from a stream addressed by a path of
//! integer tags below the master seed (replica index, purpose, step, ...).
//! Results therefore depend only on the master seed and the path, never on
//! scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Random stream used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// A node in the seed tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

/// Stream purposes used below a replica or experiment seed.
pub mod tag {
    pub const REPLICA: u64 = 0x5245_504c;
    pub const DRAWS: u64 = 0x4452_4157;
    pub const BOOTSTRAP: u64 = 0x424f_4f54;
    pub const FIELD: u64 = 0x4649_454c;
    pub const PRE: u64 = 0x0050_5245;
    pub const POST: u64 = 0x504f_5354;
    pub const EVOLVE: u64 = 0x4556_4f4c;
    pub const LINEAR: u64 = 0x4c49_4e45;
    pub const SMOOTH: u64 = 0x534d_4f4f;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Seed {
    pub fn child(self, tag: u64) -> Seed {
        Seed(splitmix64(self.0 ^ splitmix64(tag.wrapping_add(0x632b_e59b_d9b4_e019))))
    }

    pub fn path(self, tags: &[u64]) -> Seed {
        tags.iter().fold(self, |s, &t| s.child(t))
    }

    pub fn rng(self) -> SimRng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}

//! Counter-based seed derivation.
//!
//! Every random stream in the crate is addressed by a path of integer keys
//! hanging off a root seed, e.g. `seed.derive(PHASE).derive(replicate)`. The
//! derived seed keys a ChaCha8 generator, so the draws of replicate `r` depend
//! only on `(root, path)` and never on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngSeed {
    pub const fn new(seed: u64) -> Self {
        Self(seed)
    }

    /// Child seed for stream `key`. Distinct keys give statistically
    /// independent streams; the mapping is a pure function.
    #[inline]
    pub fn derive(self, key: u64) -> Self {
        let a = splitmix64(self.0 ^ 0x6A09_E667_F3BC_C908);
        Self(splitmix64(a ^ splitmix64(key.wrapping_add(0xBB67_AE85_84CA_A73B))))
    }

    pub fn rng(self) -> StreamRng {
        let mut key = [0u8; 32];
        let mut s = self.0;
        for chunk in key.chunks_exact_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    /// Fresh seed from OS entropy, for `--random-seed` style entry points.
    pub fn from_entropy() -> Self {
        Self(rand::random())
    }
}

impl From<u64> for RngSeed {
    fn from(v: u64) -> Self {
        Self(v)
    }
}

/// Stream tags used across modules so that sub-seeds never collide.
pub(crate) mod tags {
    pub const TIE_BREAK: u64 = 0x7469_6573;
    pub const PERMUTE: u64 = 0x7065_726d;
    pub const PHASE_PQ: u64 = 0x7071;
    pub const PHASE_T: u64 = 0x7473;
    pub const CDF_ATOMS: u64 = 0x0063_6466;
    pub const DATA: u64 = 0x6461_7461;
    pub const METHOD: u64 = 0x6d74_6864;
}

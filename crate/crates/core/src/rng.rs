//! Seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a 64-bit
//! value. Jobs derive their seed from a root seed, a stream tag and a job
//! index, so the stream a job sees does not depend on scheduling and serial
//! and parallel runs agree bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags used by the experiment harness.
pub mod stream {
    pub const TRUTH: u64 = 0x7275_7468;
    pub const REFERENCE: u64 = 0x7265_6673;
    pub const FORWARD: u64 = 0x666f_7277;
    pub const RESAMPLE: u64 = 0x7273_6d70;
    pub const NCH: u64 = 0x6e63_6868;
    pub const MCMC: u64 = 0x6d63_6d63;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `splitmix64(splitmix64(splitmix64(root) ^ stream) ^ index)`.
pub fn derive_seed(root: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(root) ^ stream) ^ index)
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

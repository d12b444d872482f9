//! Reproducible random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream selected by a
//! master seed plus a path of integers (replica index, purpose tag, ...).
//! Streams are independent of each other, so adding replicas never changes
//! the draws of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags for the second path component.
pub mod purpose {
    pub const WIRING: u64 = 1;
    pub const THRESHOLDS: u64 = 2;
    pub const STATES: u64 = 3;
    pub const BRANCHING: u64 = 4;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for `master` at `path`. The empty path is the master stream.
pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    if !path.is_empty() {
        let id = path
            .iter()
            .fold(0x5851_f42d_4c95_7f2d_u64, |acc, &p| splitmix(acc ^ splitmix(p)));
        rng.set_stream(id);
    }
    rng
}

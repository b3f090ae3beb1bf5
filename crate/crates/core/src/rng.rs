//! Named random streams derived from one master seed.
//!
//! Each consumer draws from its own ChaCha stream, so adding or removing a
//! consumer never shifts the numbers seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stream {
    WorldGen,
    Sensor,
    Odometry,
    /// RANSAC stream for scheme slot `n`.
    Scheme(u8),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::WorldGen => 1,
            Stream::Sensor => 2,
            Stream::Odometry => 3,
            Stream::Scheme(n) => 16 + u64::from(n),
        }
    }
}

pub fn stream(master_seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(which.id());
    rng
}

//! Seeded generators with one independent ChaCha stream per noise source, so
//! changing one sensor's configuration never shifts another sensor's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Trajectory = 0,
    Imu = 1,
    Gps = 2,
    Uwb = 3,
    Baro = 4,
}

pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

//! Named deterministic random streams derived from one run seed.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Independent consumers of randomness. The discriminant selects the ChaCha
/// stream, so streams never overlap for a fixed seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Generation = 1,
    Basis = 2,
    Soe = 3,
    Shuffle = 4,
}

/// ChaCha20 keyed by `seed`, on stream `(stream << 32) | index`.
pub fn stream_rng(seed: u64, stream: Stream, index: u32) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 32) | index as u64);
    rng
}

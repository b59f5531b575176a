//! Seedable, splittable random streams shared by the chain and SDE simulators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Recorded in run metadata so that outputs can be regenerated.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9); seed_from_u64(master), set_stream(index)";

/// Independent stream `index` derived from `master`.
pub fn stream(master: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

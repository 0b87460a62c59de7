//! Seeded randomness.
//!
//! Every stochastic component draws from `ChaCha8Rng::seed_from_u64(seed)`.
//! Components that need independent streams derive their seed with
//! [`derive_seed`], which is a fixed SplitMix64 mix of the parent seed and a
//! stream label. Both algorithms are frozen: changing them changes every
//! recorded baseline.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer applied to `seed ^ stream * golden`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

//! Seeded pseudo-random generation.
//!
//! Every stochastic operation in the crate takes a generator explicitly. The
//! generator is xoshiro256++ seeded through SplitMix64, which is portable and
//! produces the same stream on every platform.

use rand::SeedableRng;
pub use rand_xoshiro::Xoshiro256PlusPlus as Rng;

/// Creates the generator for `seed`.
pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Derives an independent child generator from `parent`.
pub fn fork(parent: &mut Rng) -> Rng {
    use rand::RngCore;
    Rng::seed_from_u64(parent.next_u64())
}

//! Seeded random streams. Every stochastic routine in the crate draws from a
//! [`Xoshiro256PlusPlus`] derived from a master seed and a stream index, so
//! ensembles are reproducible regardless of thread scheduling.

use rand::SeedableRng;
pub use rand_xoshiro::Xoshiro256PlusPlus as StreamRng;

/// Generator name written to run metadata.
pub const RNG_NAME: &str = "xoshiro256++";

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// The `index`-th stream of `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    // seed_from_u64 runs the value through SplitMix64, which decorrelates
    // neighbouring inputs.
    StreamRng::seed_from_u64(seed ^ index.wrapping_add(1).wrapping_mul(GOLDEN))
}

/// Uniform draw on `(0, 1]`.
#[inline]
pub fn open_closed<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.gen::<f64>()
}

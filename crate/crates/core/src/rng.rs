//! Seeded, stream-addressable random number generation.
//!
//! Every stochastic routine takes an explicit `u64` seed and derives
//! independent substreams with [`stream`]. Substreams are keyed by a salt,
//! so chunked parallel sampling can hand chunk `c` the stream `(seed, c)`
//! and obtain the same draws regardless of how chunks are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate. ChaCha is counter-based and
/// platform-independent, which keeps seeded experiments reproducible
/// across machines.
pub type LabRng = ChaCha8Rng;

/// Derive the substream of `seed` addressed by `salt`.
pub fn stream(seed: u64, salt: u64) -> LabRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(salt);
    rng
}

/// Uniform draw from `[-1, 1]`.
pub fn unit_symmetric(rng: &mut LabRng) -> f64 {
    rng.gen_range(-1.0..=1.0)
}

/// Uniform point on the unit 2-sphere as a 3-vector, drawn via the
/// area-preserving cylinder parameterisation.
pub fn unit_sphere_point(rng: &mut LabRng) -> [f64; 3] {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    [r * phi.cos(), r * phi.sin(), z]
}

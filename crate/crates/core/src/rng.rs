//! Deterministic random streams keyed by `(seed, stream_id)`.
//!
//! Trials get a ChaCha stream each; per-site coin flips use a stateless
//! counter hash so a site's uniform never depends on visiting order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer. Bijective on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of a derived stream, e.g. the seed of trial `i` under a master seed.
#[inline]
pub fn derive_seed(seed: u64, stream_id: u64) -> u64 {
    mix64(seed ^ mix64(stream_id.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Uniform in `[0, 1)` attached to `(seed, counter)`, 53 bits of precision.
#[inline]
pub fn counter_uniform(seed: u64, counter: u64) -> f64 {
    let bits = mix64(mix64(seed) ^ counter.wrapping_mul(0xD1B5_4A32_D192_ED03));
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A ChaCha8 generator on stream `stream_id` of `seed`.
pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

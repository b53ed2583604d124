use crate::lattice::{Config, Window};
use crate::rng::counter_uniform;

/// The uniform attached to `site` under `seed`. Coupled Bernoulli samples at
/// different `p` share these values.
#[inline]
pub fn site_uniform(seed: u64, site: usize) -> f64 {
    counter_uniform(seed, site as u64)
}

/// I.i.d. occupancy with probability `p`; site `i` is open iff its uniform is below `p`.
pub fn sample_bernoulli(p: f64, window: &Window, seed: u64) -> Config {
    Config::from_fn(window.clone(), format!("bernoulli(p={p})"), seed, |i| site_uniform(seed, i) < p)
}

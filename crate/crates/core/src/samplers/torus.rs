use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::{BitField, Config, Window};
use crate::rng::stream;

/// Number of walk steps `floor(u N^d)`, overflow-checked.
pub fn torus_steps(u: f64, n: usize, d: usize) -> Result<u64> {
    if !(u >= 0.0) || !u.is_finite() {
        return Err(Error::InvalidParameter(format!("u = {u} must be finite and nonnegative")));
    }
    let vol = (n as u64)
        .checked_pow(d as u32)
        .ok_or_else(|| Error::Overflow(format!("N^d for N = {n}, d = {d}")))?;
    let steps = (u * vol as f64).floor();
    if steps >= u64::MAX as f64 / 2.0 {
        return Err(Error::Overflow(format!("u N^d = {steps}")));
    }
    Ok(steps as u64)
}

/// Visit levels of the walk on the torus: `first[i]` is the step at which
/// site `i` is first visited (`u64::MAX` if never within `max_steps`).
pub fn torus_first_visits(window: &Window, max_steps: u64, seed: u64) -> Vec<u64> {
    let mut rng = stream(seed, 0x7a5);
    let mut first = vec![u64::MAX; window.len()];
    let mut x = rng.random_range(0..window.len());
    first[x] = 0;
    let d = window.dim();
    for t in 1..=max_steps {
        let r = rng.random_range(0..2 * d);
        x = window.neighbor(x, r >> 1, r & 1 == 0).expect("torus neighbors always exist");
        if first[x] == u64::MAX {
            first[x] = t;
        }
    }
    first
}

/// Vacant set of the first `floor(u N^d)` steps of a walk on the torus
/// `(Z/NZ)^d` from a uniform start.
pub fn sample_torus_vacant(u: f64, n: usize, d: usize, seed: u64) -> Result<Config> {
    if d < 3 {
        return Err(Error::InvalidParameter(format!("torus vacant set needs d >= 3, got {d}")));
    }
    if n < 4 {
        return Err(Error::InvalidParameter(format!("torus side {n} must be at least 4")));
    }
    let window = Window::torus(d, n)?;
    let steps = torus_steps(u, n, d)?;
    let first = if steps == 0 { vec![u64::MAX; window.len()] } else { torus_first_visits(&window, steps, seed) };
    let bits = BitField::from_fn(window.len(), |i| first[i] == u64::MAX);
    Config::new(window, bits, format!("torus_vacant(u={u},N={n})"), seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_level_is_full() {
        assert_eq!(sample_torus_vacant(0.0, 6, 3, 1).unwrap().occupied_count(), 216);
        assert!(sample_torus_vacant(0.1, 3, 3, 1).is_err());
        assert!(sample_torus_vacant(0.1, 8, 2, 1).is_err());
        assert!(torus_steps(1e30, 1 << 20, 3).is_err());
    }

    #[test]
    fn visited_count_bounded_by_steps() {
        for seed in 0..10 {
            let c = sample_torus_vacant(0.3, 8, 3, seed).unwrap();
            let visited = 512 - c.occupied_count();
            assert!(visited as u64 <= torus_steps(0.3, 8, 3).unwrap() + 1);
            assert!(visited > 0);
        }
    }

    /// Independent walk on coordinate triples with its own generator.
    fn oracle_density(u: f64, n: i64, seed: u64) -> f64 {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let mut seen = std::collections::HashSet::new();
        let mut x = [rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n)];
        seen.insert(x);
        let steps = (u * (n * n * n) as f64).floor() as u64;
        for _ in 0..steps {
            let axis = rng.random_range(0..3);
            let s = if rng.random_bool(0.5) { 1 } else { n - 1 };
            x[axis] = (x[axis] + s) % n;
            seen.insert(x);
        }
        1.0 - seen.len() as f64 / (n * n * n) as f64
    }

    #[test]
    fn mean_density_matches_independent_walk() {
        let trials = 400;
        let a: Vec<f64> = (0..trials).map(|s| sample_torus_vacant(0.4, 6, 3, s).unwrap().density()).collect();
        let b: Vec<f64> = (0..trials).map(|s| oracle_density(0.4, 6, 10_000 + s)).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        let (ma, mb) = (mean(&a), mean(&b));
        let se = ((var(&a, ma) + var(&b, mb)) / trials as f64).sqrt();
        assert!((ma - mb).abs() < 3.0 * se, "{ma} vs {mb} (se {se})");
    }
}

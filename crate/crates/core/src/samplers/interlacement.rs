//! Random interlacements restricted to a finite box.
//!
//! Inside `K` the interlacement at level `u` is a Poisson(`u cap(K)`) union of
//! forward random walk traces started from the normalised equilibrium measure
//! of `K`. Walks are killed when they leave `B(0, escape_radius)`; escape
//! probabilities are estimated by the same killed walks, so the capacity used
//! is the capacity relative to that ball.
//!
//! Trajectories arrive at levels `t_1 < t_2 < ...` with Exp(`cap`) gaps and a
//! draw at level `u` keeps those with `t_j <= u`. Samples at different levels
//! under one seed are therefore nested.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::lattice::{BitField, Config, Point, Window};
use crate::rng::stream;

/// Ball radius (l-infinity, about the origin) of a set of points.
fn radius_of(points: impl IntoIterator<Item = Point>) -> u64 {
    points.into_iter().map(|p| p.linf_norm()).max().unwrap_or(0)
}

/// One nearest-neighbor step, uniform over the `2d` directions.
#[inline]
pub(crate) fn srw_step(rng: &mut ChaCha8Rng, x: &mut [i64]) -> usize {
    let r = rng.random_range(0..2 * x.len());
    let axis = r >> 1;
    x[axis] += if r & 1 == 0 { 1 } else { -1 };
    axis
}

/// Runs a walk from `x` until it leaves `B(0, rho)` or `stop` fires on a
/// visited position (after the first step). Returns whether `stop` fired.
fn run_walk(rng: &mut ChaCha8Rng, x: &mut [i64], rho: i64, mut stop: impl FnMut(&[i64]) -> bool) -> bool {
    loop {
        let axis = srw_step(rng, x);
        if x[axis].abs() > rho {
            return false;
        }
        if stop(x) {
            return true;
        }
    }
}

/// Per-site escape statistics of a finite set.
#[derive(Clone, Debug)]
struct EscapeTable {
    /// Estimated escape probability of each site.
    escape: Vec<f64>,
    /// Attempts per site.
    attempts: Vec<u64>,
}

impl EscapeTable {
    fn capacity(&self) -> (f64, f64) {
        let cap = self.escape.iter().sum();
        let var: f64 = self
            .escape
            .iter()
            .zip(&self.attempts)
            .map(|(&e, &n)| if n > 1 { e * (1.0 - e) / (n - 1) as f64 } else { 0.0 })
            .sum();
        (cap, var.sqrt())
    }
}

/// Escape trials distributed round-robin over the sites of `k`, membership
/// tested through the box `bbox`.
fn escape_table(sites: &[Point], bbox: &Window, member: &BitField, rho: i64, trials: u64, seed: u64) -> EscapeTable {
    let n = sites.len();
    let mut rng = stream(seed, 0xca9);
    let mut hits = vec![0u64; n];
    let mut attempts = vec![0u64; n];
    for t in 0..trials {
        let s = (t % n as u64) as usize;
        let mut x = sites[s].coords().to_vec();
        let returned = run_walk(&mut rng, &mut x, rho, |y| bbox.index_of_coords(y).is_some_and(|j| member.get(j)));
        attempts[s] += 1;
        if !returned {
            hits[s] += 1;
        }
    }
    let escape = hits.iter().zip(&attempts).map(|(&h, &a)| if a == 0 { 0.0 } else { h as f64 / a as f64 }).collect();
    EscapeTable { escape, attempts }
}

fn bounding_box(sites: &[Point]) -> Result<Window> {
    let d = sites[0].dim();
    let lo: Vec<i64> = (0..d).map(|a| sites.iter().map(|p| p[a]).min().unwrap()).collect();
    let hi: Vec<i64> = (0..d).map(|a| sites.iter().map(|p| p[a]).max().unwrap()).collect();
    Window::new_box(lo.clone(), (0..d).map(|a| (hi[a] - lo[a] + 1) as usize).collect())
}

/// Capacity of `k` relative to `B(0, escape_radius)` with its standard error.
pub fn estimate_capacity(k: &[Point], escape_radius: u64, trials: u64, seed: u64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::InvalidParameter("capacity needs at least one trial".into()));
    }
    if k.is_empty() {
        return Ok((0.0, 0.0));
    }
    let d = k[0].dim();
    if d < 3 {
        return Err(Error::InvalidParameter(format!("capacity needs a transient walk, d = {d}")));
    }
    let radius = radius_of(k.iter().cloned());
    if escape_radius < 4 * radius.max(1) {
        return Err(Error::InvalidParameter(format!(
            "escape radius {escape_radius} must be at least 4 times the set radius {radius}"
        )));
    }
    let bbox = bounding_box(k)?;
    let mut member = BitField::zeros(bbox.len());
    let mut sites: Vec<Point> = Vec::with_capacity(k.len());
    for p in k {
        let j = bbox.index_of(p).expect("inside bounding box");
        if !member.get(j) {
            member.set(j, true);
            sites.push(p.clone());
        }
    }
    Ok(escape_table(&sites, &bbox, &member, escape_radius as i64, trials, seed).capacity())
}

/// Interlacement sampler for a fixed box window: the equilibrium measure is
/// estimated once and reused by every draw.
#[derive(Clone, Debug)]
pub struct InterlacementSampler {
    window: Window,
    escape_radius: i64,
    sites: Vec<Point>,
    cumulative: Vec<f64>,
    cap: f64,
    cap_stderr: f64,
}

impl InterlacementSampler {
    pub fn new(window: &Window, escape_radius: u64, trials: u64, seed: u64) -> Result<Self> {
        if window.dim() < 3 {
            return Err(Error::InvalidParameter(format!("interlacements need d >= 3, got {}", window.dim())));
        }
        if window.is_torus() {
            return Err(Error::InvalidParameter("interlacements are sampled on box windows".into()));
        }
        if trials == 0 {
            return Err(Error::InvalidParameter("capacity needs at least one trial".into()));
        }
        let sites: Vec<Point> = (0..window.len()).map(|i| window.point_of(i)).collect();
        let radius = radius_of(sites.iter().cloned());
        if escape_radius <= radius {
            return Err(Error::InvalidParameter(format!(
                "escape radius {escape_radius} must exceed the window radius {radius}"
            )));
        }
        let member = BitField::ones(window.len());
        let table = escape_table(&sites, window, &member, escape_radius as i64, trials, seed);
        let (cap, cap_stderr) = table.capacity();
        let mut acc = 0.0;
        let cumulative = table
            .escape
            .iter()
            .map(|e| {
                acc += e;
                acc
            })
            .collect();
        Ok(InterlacementSampler { window: window.clone(), escape_radius: escape_radius as i64, sites, cumulative, cap, cap_stderr })
    }

    pub fn capacity(&self) -> (f64, f64) {
        (self.cap, self.cap_stderr)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    /// Trace of the interlacement at level `u` inside the window.
    pub fn sample(&self, u: f64, seed: u64) -> Result<Config> {
        Ok(self.sample_levels(&[u], seed)?.pop().expect("one level"))
    }

    /// Nested traces at every level in `levels`, from a single draw.
    pub fn sample_levels(&self, levels: &[f64], seed: u64) -> Result<Vec<Config>> {
        if levels.iter().any(|&u| !(u >= 0.0) || !u.is_finite()) {
            return Err(Error::InvalidParameter("interlacement levels must be finite and nonnegative".into()));
        }
        let top = levels.iter().cloned().fold(0.0, f64::max);
        let n = self.window.len();
        // First level at which each site is hit.
        let mut first_hit = vec![f64::INFINITY; n];
        if self.cap > 0.0 && top > 0.0 {
            let mut rng = stream(seed, 0x1e7);
            let gaps = Exp::new(self.cap).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let mut level = 0.0;
            loop {
                level += gaps.sample(&mut rng);
                if level > top {
                    break;
                }
                let target = rng.random::<f64>() * self.cap;
                let s = self.cumulative.partition_point(|&c| c <= target).min(n - 1);
                let mut x = self.sites[s].coords().to_vec();
                let mark = |x: &[i64], first: &mut [f64]| {
                    if let Some(j) = self.window.index_of_coords(x) {
                        if first[j] > level {
                            first[j] = level;
                        }
                    }
                };
                mark(&x, &mut first_hit);
                run_walk(&mut rng, &mut x, self.escape_radius, |y| {
                    mark(y, &mut first_hit);
                    false
                });
            }
        }
        Ok(levels
            .iter()
            .map(|&u| Config::from_fn(self.window.clone(), format!("interlacement(u={u})"), seed, |i| first_hit[i] <= u))
            .collect())
    }

    /// Vacant set: the complement of the trace.
    pub fn sample_vacant(&self, u: f64, seed: u64) -> Result<Config> {
        let c = self.sample(u, seed)?;
        let v = c.complement();
        Config::new(v.window().clone(), v.occupancy().clone(), format!("vacant_interlacement(u={u})"), seed)
    }
}

pub fn sample_interlacement(u: f64, window: &Window, escape_radius: u64, trials_cap: u64, seed: u64) -> Result<Config> {
    InterlacementSampler::new(window, escape_radius, trials_cap, crate::rng::derive_seed(seed, 1))?.sample(u, seed)
}

pub fn sample_vacant_interlacement(
    u: f64,
    window: &Window,
    escape_radius: u64,
    trials_cap: u64,
    seed: u64,
) -> Result<Config> {
    InterlacementSampler::new(window, escape_radius, trials_cap, crate::rng::derive_seed(seed, 1))?.sample_vacant(u, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::gff::build_green_matrix;

    #[test]
    fn empty_set_and_zero_trials() {
        assert_eq!(estimate_capacity(&[], 10, 5, 1).unwrap(), (0.0, 0.0));
        assert!(estimate_capacity(&[Point::origin(3)], 10, 0, 1).is_err());
        assert!(estimate_capacity(&[Point::new(vec![3, 0, 0])], 10, 5, 1).is_err());
    }

    #[test]
    fn point_capacity_is_inverse_green_diagonal() {
        // Escape from 0 before return, killed outside B(0, rho), has
        // probability 1 / g(0, 0) for the walk killed outside that box.
        let rho = 12;
        let (cap, se) = estimate_capacity(&[Point::origin(3)], rho, 200_000, 9).unwrap();
        let w = Window::new_box(vec![0, 0, 0], vec![1, 1, 1]).unwrap();
        let g = build_green_matrix(&w, rho as usize).unwrap().get(0, 0);
        assert!((cap - 1.0 / g).abs() < 3.5 * se, "cap {cap} +- {se}, oracle {}", 1.0 / g);
    }

    #[test]
    fn capacity_is_monotone_in_the_set() {
        let small: Vec<Point> = vec![Point::origin(3)];
        let big: Vec<Point> = (0..3).map(|i| Point::new(vec![i, 0, 0])).collect();
        let (a, sa) = estimate_capacity(&small, 16, 60_000, 4).unwrap();
        let (b, sb) = estimate_capacity(&big, 16, 60_000, 4).unwrap();
        assert!(a <= b + 3.0 * (sa * sa + sb * sb).sqrt());
    }

    #[test]
    fn zero_level_is_empty_and_levels_nest() {
        let w = Window::centered(3, 2).unwrap();
        let s = InterlacementSampler::new(&w, 12, 5_000, 2).unwrap();
        assert_eq!(s.sample(0.0, 5).unwrap().occupied_count(), 0);
        assert_eq!(s.sample_vacant(0.0, 5).unwrap().occupied_count(), w.len());
        for seed in 0..20 {
            let cs = s.sample_levels(&[0.1, 0.5, 1.0, 3.0], seed).unwrap();
            for pair in cs.windows(2) {
                assert!(pair[0].occupancy().is_subset_of(pair[1].occupancy()));
            }
            let single = s.sample(0.5, seed).unwrap();
            assert_eq!(single.occupancy(), cs[1].occupancy());
            let vac = s.sample_vacant(0.5, seed).unwrap();
            assert_eq!(vac.occupancy(), &single.occupancy().not());
        }
    }

    #[test]
    fn window_radius_guard() {
        let w = Window::centered(3, 4).unwrap();
        assert!(InterlacementSampler::new(&w, 4, 10, 0).is_err());
        let w2 = Window::centered(2, 1).unwrap();
        assert!(InterlacementSampler::new(&w2, 10, 10, 0).is_err());
    }
}

use serde::{Deserialize, Serialize};

use super::density::sampler;
use super::report::{run_trials, Observation, TrialRecord, TrialReport};
use super::stats::{linear_fit, mean, summarize, LinearFit, Summary, Z95};
use crate::error::{Error, Result};
use crate::lattice::{Config, Window};
use crate::samplers::ModelSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceDecay {
    pub distances: Vec<u64>,
    /// Spatially averaged `Cov(1_x, 1_{x + r e_i})` per distance.
    pub covariances: Vec<Summary>,
    /// Log-log fit over the distances with positive mean covariance.
    pub fit: Option<LinearFit>,
    pub report: TrialReport,
}

/// Counts over all in-window pairs `(x, x + r e_i)`, every axis: pairs, both
/// occupied, first occupied, second occupied.
fn pair_counts(config: &Config, r: u64) -> (u64, u64, u64, u64) {
    let w = config.window();
    let r = r as usize;
    let (mut n, mut both, mut first, mut second) = (0u64, 0u64, 0u64, 0u64);
    for axis in 0..w.dim() {
        let side = w.sides()[axis];
        let step = w.strides()[axis];
        if !w.is_torus() && r >= side {
            continue;
        }
        for i in 0..w.len() {
            let o = w.offset_along(i, axis);
            let j = if w.is_torus() {
                i - o * step + ((o + r) % side) * step
            } else if o + r < side {
                i + r * step
            } else {
                continue;
            };
            let (a, b) = (config.is_occupied(i), config.is_occupied(j));
            n += 1;
            both += (a && b) as u64;
            first += a as u64;
            second += b as u64;
        }
    }
    (n, both, first, second)
}

/// Within-sample covariance of occupation indicators at axis offset `r`,
/// averaged over all in-window pairs along every axis.
pub fn pair_covariance(config: &Config, r: u64) -> f64 {
    let (n, both, first, second) = pair_counts(config, r);
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    both as f64 / n - (first as f64 / n) * (second as f64 / n)
}

/// Fraction of in-window pairs at axis offset `r` with both sites occupied.
pub fn pair_product_mean(config: &Config, r: u64) -> f64 {
    let (n, both, _, _) = pair_counts(config, r);
    if n == 0 { 0.0 } else { both as f64 / n as f64 }
}

/// Two-point covariance decay with a log-log slope fit.
///
/// The covariance at distance `r` is `E[1_x 1_y] - q^2` with `q` the density
/// pooled over all trials, so it is not biased by subtracting each window's
/// own mean. Errors come from the delta method on the per-trial pair.
pub fn covariance_decay(
    spec: &ModelSpec,
    window: &Window,
    distances: &[u64],
    trials: usize,
    master_seed: u64,
) -> Result<CovarianceDecay> {
    let mut ds = distances.to_vec();
    ds.sort_unstable();
    ds.dedup();
    if ds.iter().filter(|&&r| r > 0).count() < 4 {
        return Err(Error::InvalidParameter("need at least 4 distinct positive distances".into()));
    }
    if ds.iter().any(|&r| r as usize >= window.min_side()) {
        return Err(Error::InvalidWindow("distances must be smaller than every window side".into()));
    }
    let s = sampler(spec, window, master_seed)?;
    let records = run_trials(master_seed, trials, |t, seed| -> Result<TrialRecord> {
        let c = s.sample(seed)?;
        let mut observations = vec![Observation::new("density", c.density())];
        observations.extend(ds.iter().map(|&r| Observation::new(format!("prod@{r}"), pair_product_mean(&c, r))));
        Ok(TrialRecord { trial: t, seed, observations, excluded: None })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut report = TrialReport::new(Some(spec.clone()), master_seed, records);
    report.summarize(&["density"])?;
    let q = report.values("density");
    let q_bar = mean(&q);
    let covariances: Vec<Summary> = ds
        .iter()
        .map(|r| {
            let m = report.values(&format!("prod@{r}"));
            let cov = mean(&m) - q_bar * q_bar;
            let psi: Vec<f64> = m.iter().zip(&q).map(|(mi, qi)| mi - 2.0 * q_bar * qi).collect();
            let s = summarize(&psi)?;
            Ok(Summary { mean: cov, ci95: (cov - Z95 * s.stderr, cov + Z95 * s.stderr), ..s })
        })
        .collect::<Result<_>>()?;
    let (mut x, mut y, mut e) = (Vec::new(), Vec::new(), Vec::new());
    for (&r, c) in ds.iter().zip(&covariances) {
        if r > 0 && c.mean > 0.0 {
            x.push((r as f64).ln());
            y.push(c.mean.ln());
            e.push(if c.stderr > 0.0 { c.stderr / c.mean } else { 1.0 });
        }
    }
    let fit = if x.len() >= 2 { linear_fit(&x, &y, &e).ok() } else { None };
    Ok(CovarianceDecay { distances: ds, covariances, fit, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_matches_a_hand_count() {
        // Occupied iff the fast coordinate is even.
        let w = Window::new_box(vec![0, 0], vec![4, 4]).unwrap();
        let c = Config::from_fn(w, "stripes", 0, |i| i % 2 == 0);
        // r = 1: 24 pairs, 6 doubly occupied, 14 first and 10 second sites occupied.
        let want1 = 6.0 / 24.0 - (14.0 / 24.0) * (10.0 / 24.0);
        assert!((pair_covariance(&c, 1) - want1).abs() < 1e-12);
        // r = 2: 16 pairs, 8 doubly occupied, 8 on each side.
        assert!((pair_covariance(&c, 2) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn bernoulli_covariances_vanish() {
        let w = Window::centered(2, 15).unwrap();
        let cd = covariance_decay(&ModelSpec::bernoulli(0.4, 2), &w, &[0, 1, 2, 4, 8], 40, 1).unwrap();
        // Distance 0 gives the indicator variance q(1 - q).
        assert!((cd.covariances[0].mean - 0.24).abs() < 3.0 * cd.covariances[0].stderr + 0.01);
        for c in &cd.covariances[1..] {
            assert!(c.mean.abs() <= 3.0 * c.stderr + 1e-12, "{c:?}");
        }
    }

    #[test]
    fn rejects_short_distance_lists() {
        let w = Window::centered(2, 10).unwrap();
        assert!(covariance_decay(&ModelSpec::bernoulli(0.4, 2), &w, &[0, 1, 2, 2, 3], 30, 0).is_err());
    }
}

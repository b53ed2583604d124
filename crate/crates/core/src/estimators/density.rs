use serde::{Deserialize, Serialize};

use super::report::{run_trials, Observation, TrialRecord, TrialReport};
use super::stats::Summary;
use crate::cluster::{label_components, s_infty_proxy, ProxyPolicy};
use crate::error::Result;
use crate::lattice::{Config, Window};
use crate::rng::derive_seed;
use crate::samplers::{ModelSampler, ModelSpec};

/// Stream reserved for sampler precomputation under a master seed.
pub const PREP_STREAM: u64 = u64::MAX;

/// Sampler whose precomputation is seeded from `master_seed`.
pub fn sampler(spec: &ModelSpec, window: &Window, master_seed: u64) -> Result<ModelSampler> {
    ModelSampler::new(spec, window, derive_seed(master_seed, PREP_STREAM))
}

/// Fraction of central-half sites lying in the infinite-cluster proxy.
pub fn central_density(config: &Config) -> Result<f64> {
    let lab = label_components(config);
    let proxy = s_infty_proxy(config, &lab, ProxyPolicy::DiameterSpan)?;
    let central = config.window().central_half();
    Ok(central.iter().filter(|&&i| proxy.is_occupied(i)).count() as f64 / central.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub parameter: f64,
    pub eta_hat: f64,
    pub summary: Summary,
    pub report: TrialReport,
}

/// Monte Carlo estimate of the infinite-cluster density.
pub fn estimate_density(spec: &ModelSpec, window: &Window, trials: usize, master_seed: u64) -> Result<DensityEstimate> {
    Ok(density_sweep(spec, window, &[spec.parameter()], trials, master_seed)?.estimates.remove(0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensitySweep {
    pub estimates: Vec<DensityEstimate>,
    /// Trials whose proxies were not nested along the sweep (must be zero).
    pub monotonicity_violations: usize,
}

/// Densities along a parameter sweep, every trial drawn from shared
/// randomness. Nesting of the proxy sets is checked per trial.
pub fn density_sweep(
    spec: &ModelSpec,
    window: &Window,
    params: &[f64],
    trials: usize,
    master_seed: u64,
) -> Result<DensitySweep> {
    let s = sampler(spec, window, master_seed)?;
    let increasing = spec.increasing_in_parameter();
    let per_trial = run_trials(master_seed, trials, |_, seed| -> Result<(Vec<f64>, bool)> {
        let configs = s.sample_coupled(params, seed)?;
        let mut etas = Vec::with_capacity(params.len());
        let mut proxies = Vec::with_capacity(params.len());
        for c in &configs {
            let lab = label_components(c);
            let proxy = s_infty_proxy(c, &lab, ProxyPolicy::DiameterSpan)?;
            let central = c.window().central_half();
            etas.push(central.iter().filter(|&&i| proxy.is_occupied(i)).count() as f64 / central.len() as f64);
            proxies.push(proxy);
        }
        let nested = proxies.windows(2).zip(params.windows(2)).all(|(p, x)| {
            let grows = (x[1] >= x[0]) == increasing;
            if grows {
                p[0].occupancy().is_subset_of(p[1].occupancy())
            } else {
                p[1].occupancy().is_subset_of(p[0].occupancy())
            }
        });
        Ok((etas, nested))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let monotonicity_violations = per_trial.iter().filter(|(_, ok)| !ok).count();
    let estimates = params
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let records = per_trial
                .iter()
                .enumerate()
                .map(|(t, (etas, _))| TrialRecord {
                    trial: t,
                    seed: super::report::trial_seed(master_seed, t),
                    observations: vec![Observation::new("eta", etas[j])],
                    excluded: None,
                })
                .collect();
            let mut report = TrialReport::new(Some(spec.with_parameter(x)), master_seed, records);
            report.summarize(&["eta"])?;
            let summary = report.summary["eta"];
            Ok(DensityEstimate { parameter: x, eta_hat: summary.mean, summary, report })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DensitySweep { estimates, monotonicity_violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extreme_densities_are_exact() {
        let w = Window::centered(2, 10).unwrap();
        let one = estimate_density(&ModelSpec::bernoulli(1.0, 2), &w, 30, 1).unwrap();
        assert_eq!(one.eta_hat, 1.0);
        assert_eq!(one.summary.stderr, 0.0);
        let zero = estimate_density(&ModelSpec::bernoulli(0.0, 2), &w, 30, 1).unwrap();
        assert_eq!(zero.eta_hat, 0.0);
        assert!(estimate_density(&ModelSpec::bernoulli(0.5, 2), &w, 10, 1).is_err());
    }

    #[test]
    fn coupled_sweep_is_monotone() {
        let w = Window::centered(2, 20).unwrap();
        let ps = [0.5, 0.55, 0.6, 0.65, 0.7];
        let sw = density_sweep(&ModelSpec::bernoulli(0.6, 2), &w, &ps, 40, 9).unwrap();
        assert_eq!(sw.monotonicity_violations, 0);
        for pair in sw.estimates.windows(2) {
            assert!(pair[0].eta_hat <= pair[1].eta_hat);
        }
        let trials: Vec<_> = sw.estimates.iter().map(|e| e.report.values("eta")).collect();
        for t in 0..40 {
            for j in 1..ps.len() {
                assert!(trials[j - 1][t] <= trials[j][t]);
            }
        }
    }

    #[test]
    fn same_seed_same_report() {
        let w = Window::centered(2, 8).unwrap();
        let spec = ModelSpec::bernoulli(0.7, 2);
        assert_eq!(estimate_density(&spec, &w, 30, 4).unwrap(), estimate_density(&spec, &w, 30, 4).unwrap());
    }
}

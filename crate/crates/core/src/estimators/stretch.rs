use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use super::density::sampler;
use super::report::{run_trials, Observation, TrialRecord, TrialReport};
use super::stats::{quantile, Summary};
use crate::cluster::{label_components, Bfs};
use crate::error::{Error, Result};
use crate::lattice::{Config, Point, Window};
use crate::rng::stream;
use crate::samplers::ModelSpec;

/// Probe size: `max(2^d, ceil(ln(R)^2))`.
pub fn probe_size(r: u64, d: usize) -> usize {
    let ln = (r.max(1) as f64).ln();
    ((ln * ln).ceil() as usize).max(1 << d)
}

/// Probe subset of `candidates`: for each sign vector the site maximizing
/// the signed coordinate sum (smallest index on ties), then a uniform fill
/// without replacement up to `size`.
pub fn probe_sites(window: &Window, candidates: &[usize], size: usize, seed: u64) -> Vec<usize> {
    let d = window.dim();
    let mut probe: Vec<usize> = Vec::with_capacity(size);
    let mut c = vec![0i64; d];
    for mask in 0..1usize << d {
        let mut best: Option<(i64, usize)> = None;
        for &i in candidates {
            window.coords_into(i, &mut c);
            let v: i64 = (0..d).map(|a| if mask >> a & 1 == 1 { -c[a] } else { c[a] }).sum();
            if best.is_none_or(|(bv, bi)| v > bv || (v == bv && i < bi)) {
                best = Some((v, i));
            }
        }
        if let Some((_, i)) = best {
            if !probe.contains(&i) {
                probe.push(i);
            }
        }
    }
    let rest: Vec<usize> = candidates.iter().copied().filter(|i| !probe.contains(i)).collect();
    let fill = size.saturating_sub(probe.len()).min(rest.len());
    let mut rng = stream(seed, 0x57e);
    probe.extend(rest.choose_multiple(&mut rng, fill).copied());
    probe
}

/// Largest pairwise chemical distance over `probe`, or `None` if some pair is
/// disconnected.
pub fn probe_max_distance(config: &Config, probe: &[usize], bfs: &mut Bfs) -> Option<u64> {
    let mut best = 0u64;
    for (k, &src) in probe.iter().enumerate() {
        let rest = &probe[k + 1..];
        if rest.is_empty() {
            break;
        }
        let mut left = rest.len();
        bfs.search(config, &[src], u32::MAX, |_| true, |i| {
            if rest.contains(&i) {
                left -= 1;
            }
            left == 0
        });
        for &t in rest {
            best = best.max(bfs.distance(t)? as u64);
        }
    }
    Some(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StretchEstimate {
    #[serde(rename = "R")]
    pub r: u64,
    pub probe_size: usize,
    /// Max probe ratio `rho / R` of each included trial.
    pub max_ratios: Vec<f64>,
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
    pub summary: Summary,
    pub excluded: usize,
    pub report: TrialReport,
}

/// Distribution of `max rho(x, y) / R` over probe pairs of `S_R ∩ B(R)`.
pub fn estimate_chem_stretch(
    spec: &ModelSpec,
    window: &Window,
    r: u64,
    trials: usize,
    master_seed: u64,
) -> Result<StretchEstimate> {
    let d = window.dim();
    if r == 0 {
        return Err(Error::InvalidParameter("R must be positive".into()));
    }
    let rr = r as i64;
    if !window.covers_box(&vec![-2 * rr; d], 4 * rr + 1) {
        return Err(Error::InvalidWindow(format!("window must cover B(0, {})", 2 * r)));
    }
    let s = sampler(spec, window, master_seed)?;
    let size = probe_size(r, d);
    let ball = window.linf_ball_indices(&Point::origin(d), r as f64)?;
    let records = run_trials(master_seed, trials, |t, seed| -> Result<TrialRecord> {
        let config = s.sample(seed)?;
        let lab = label_components(&config);
        let candidates: Vec<usize> = ball
            .iter()
            .copied()
            .filter(|&i| lab.component_of(i).is_some_and(|c| lab.diameter(c) >= r))
            .collect();
        let mut rec = TrialRecord { trial: t, seed, observations: Vec::new(), excluded: None };
        if candidates.is_empty() {
            rec.excluded = Some("S_R meets no site of B(R)".into());
            return Ok(rec);
        }
        let probe = probe_sites(window, &candidates, size, seed);
        let mut bfs = Bfs::for_config(&config);
        rec.observations.push(Observation::new("probe_size", probe.len() as f64));
        match probe_max_distance(&config, &probe, &mut bfs) {
            Some(m) => rec.observations.push(Observation::new("max_ratio", m as f64 / r as f64)),
            None => rec.excluded = Some("probe sites lie in different components".into()),
        }
        Ok(rec)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut report = TrialReport::new(Some(spec.clone()), master_seed, records);
    report.summarize(&["max_ratio"])?;
    let max_ratios = report.values("max_ratio");
    let excluded = report.trials.iter().filter(|t| t.excluded.is_some()).count();
    Ok(StretchEstimate {
        r,
        probe_size: size,
        q50: quantile(&max_ratios, 0.5),
        q90: quantile(&max_ratios, 0.9),
        q99: quantile(&max_ratios, 0.99),
        summary: report.summary["max_ratio"],
        max_ratios,
        excluded,
        report,
    })
}

use serde::{Deserialize, Serialize};

use super::report::{run_trials, Observation, TrialRecord, TrialReport};
use super::stats::{quantile, summarize, Summary, MIN_TRIALS};
use crate::cluster::{label_components, Bfs, BoxComponents};
use crate::error::{Error, Result};
use crate::lattice::Config;
use crate::rng::derive_seed;
use crate::samplers::{sample_torus_vacant, Family, ModelSpec};

/// Largest `m` with `m^k <= n`.
pub fn integer_root(n: u64, k: u32) -> u64 {
    let mut m = (n as f64).powf(1.0 / k as f64).round() as u64;
    while m > 0 && m.checked_pow(k).is_none_or(|p| p > n) {
        m -= 1;
    }
    while (m + 1).checked_pow(k).is_some_and(|p| p <= n) {
        m += 1;
    }
    m
}

/// Double-sweep lower bound on the chemical diameter of the component of
/// `start`: BFS from `start`, then from the farthest site found.
pub fn double_sweep_diameter(config: &Config, start: usize, bfs: &mut Bfs) -> u64 {
    let (far, _) = bfs.sweep(config, start);
    bfs.sweep(config, far).1 as u64
}

/// Exact chemical diameter of the component of `start` by all-pairs BFS.
pub fn exact_component_diameter(config: &Config, start: usize, bfs: &mut Bfs) -> u64 {
    bfs.sweep(config, start);
    let sites = bfs.visited().to_vec();
    sites.iter().map(|&s| bfs.sweep(config, s).1 as u64).max().unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusDiameter {
    #[serde(rename = "N")]
    pub n: usize,
    /// Double-sweep diameter of the largest vacant component over `N`.
    pub summary: Summary,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    pub report: TrialReport,
}

/// Per-`N` statistics of `diam(C_max) / N` for the vacant set of the torus
/// walk. Trials at side `N` use the master seed `derive_seed(seed, N)`.
pub fn torus_giant_diameter(
    u: f64,
    d: usize,
    n_grid: &[usize],
    trials: usize,
    master_seed: u64,
) -> Result<Vec<TorusDiameter>> {
    if d < 3 {
        return Err(Error::InvalidParameter("torus giant diameter needs d >= 3".into()));
    }
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("N grid must be strictly increasing".into()));
    }
    n_grid
        .iter()
        .map(|&n| {
            let spec = ModelSpec::new(Family::TorusVacant { u, n }, d);
            spec.validate()?;
            let seed_n = derive_seed(master_seed, n as u64);
            let records = run_trials(seed_n, trials, |t, seed| -> Result<TrialRecord> {
                let c = sample_torus_vacant(u, n, d, seed)?;
                let lab = label_components(&c);
                let mut rec = TrialRecord { trial: t, seed, observations: Vec::new(), excluded: None };
                let Some(giant) = lab.largest_by_size() else {
                    rec.excluded = Some("vacant set is empty".into());
                    return Ok(rec);
                };
                let start = lab.ids().iter().position(|&id| id as usize == giant).expect("nonempty component");
                let diam = double_sweep_diameter(&c, start, &mut Bfs::for_config(&c));
                rec.observations.push(Observation::new("diameter_over_n", diam as f64 / n as f64));
                rec.observations.push(Observation::new("giant_size", lab.size(giant) as f64));
                Ok(rec)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let mut report = TrialReport::new(Some(spec), seed_n, records);
            report.summarize(&["diameter_over_n"])?;
            let v = report.values("diameter_over_n");
            Ok(TorusDiameter {
                n,
                summary: report.summary["diameter_over_n"],
                median: quantile(&v, 0.5),
                q10: quantile(&v, 0.1),
                q90: quantile(&v, 0.9),
                report,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MesoscopicReport {
    #[serde(rename = "N")]
    pub big_n: usize,
    /// Mesoscopic scale `floor(N^{1/3})`.
    pub n: usize,
    /// Density radius `floor(n^{1/d})`.
    pub density_radius: usize,
    pub c_values: Vec<f64>,
    /// Frequency of the event for each `C`.
    pub frequency: Vec<Summary>,
    /// Trials where some smaller `C` held but a larger one failed.
    pub nesting_violations: usize,
    pub report: TrialReport,
}

/// Outcome of the mesoscopic test on one sample: `None` when some block
/// fails the density condition, else the largest block diameter (`u64::MAX`
/// when it exceeds `cap`).
pub fn mesoscopic_diameter(config: &Config, n: usize, cap: u64, bfs: &mut Bfs) -> Result<Option<u64>> {
    let w = config.window();
    let d = w.dim();
    let big_n = w.sides()[0];
    if 2 * n + 1 > big_n {
        return Err(Error::InvalidWindow(format!("mesoscopic boxes of side {} exceed the torus", 2 * n + 1)));
    }
    let rho = integer_root(n as u64, d as u32) as i64;
    let half = (n / 2) as i64;
    let side = 2 * n + 1;
    let centers: Vec<usize> = (0..big_n).step_by(n.max(1)).collect();
    let mut worst = 0u64;
    let mut mark = vec![false; w.len()];
    let mut z = vec![0usize; d];
    loop {
        let lo: Vec<i64> = z.iter().map(|&c| centers[c] as i64 - n as i64).collect();
        let bc = BoxComponents::cube(w, &lo, side, |i| config.is_occupied(i))?;
        let Some(cz) = (0..bc.sizes.len()).max_by(|&a, &b| bc.sizes[a].cmp(&bc.sizes[b]).then(b.cmp(&a))) else {
            return Ok(None);
        };
        let in_cz = |local: &[i64]| bc.label_at(local) == Some(cz as u32);
        // Density: every site within n/2 of z sees C_z within rho.
        let mut x = vec![0i64; d];
        let mut y = vec![0i64; d];
        let mut off = vec![-half; d];
        loop {
            for a in 0..d {
                x[a] = lo[a] + n as i64 + off[a];
            }
            let mut found = false;
            let mut o2 = vec![-rho; d];
            'scan: loop {
                for a in 0..d {
                    y[a] = x[a] + o2[a];
                }
                if in_cz(&y) {
                    found = true;
                    break 'scan;
                }
                if !odometer(&mut o2, -rho, rho) {
                    break;
                }
            }
            if !found {
                return Ok(None);
            }
            if !odometer(&mut off, -half, half) {
                break;
            }
        }
        let sites: Vec<usize> =
            (0..bc.labels.len()).filter(|&i| bc.labels[i] == cz as u32).map(|i| bc.global[i].unwrap()).collect();
        match capped_set_diameter(config, &sites, cap, bfs, &mut mark) {
            Some(dm) => worst = worst.max(dm),
            None => return Ok(Some(u64::MAX)),
        }
        if !odometer_usize(&mut z, centers.len()) {
            break;
        }
    }
    Ok(Some(worst))
}

/// Exact `max rho(a, b)` over `a, b` in `targets`, or `None` once it exceeds
/// `cap`. Eccentricity bounds from each BFS prune the sources still needed.
pub fn capped_set_diameter(
    config: &Config,
    targets: &[usize],
    cap: u64,
    bfs: &mut Bfs,
    mark: &mut [bool],
) -> Option<u64> {
    let m = targets.len();
    if m <= 1 {
        return Some(0);
    }
    targets.iter().for_each(|&t| mark[t] = true);
    let depth = cap.min(u32::MAX as u64 - 1) as u32;
    let (mut lo, mut hi) = (vec![0u64; m], vec![u64::MAX; m]);
    let mut active = vec![true; m];
    let mut lower = 0u64;
    let mut next = 0;
    let mut pick_high = true;
    let result = loop {
        active[next] = false;
        let mut left = m;
        bfs.search(config, &[targets[next]], depth, |_| true, |i| {
            if mark[i] {
                left -= 1;
            }
            left == 0
        });
        let dist: Option<Vec<u64>> = targets.iter().map(|&t| bfs.distance(t).map(u64::from)).collect();
        let Some(dist) = dist else { break None };
        let e = *dist.iter().max().unwrap();
        for k in 0..m {
            lo[k] = lo[k].max(dist[k].max(e - dist[k]));
            hi[k] = hi[k].min(e + dist[k]);
        }
        lower = lower.max(*lo.iter().max().unwrap());
        if lower > cap {
            break None;
        }
        for k in 0..m {
            if hi[k] <= lower || lo[k] == hi[k] {
                active[k] = false;
            }
        }
        let upper = *hi.iter().max().unwrap();
        let candidates = (0..m).filter(|&k| active[k]);
        let pick = if pick_high {
            candidates.max_by_key(|&k| (hi[k], std::cmp::Reverse(k)))
        } else {
            candidates.min_by_key(|&k| (lo[k], k))
        };
        match pick {
            Some(k) if upper > lower => next = k,
            _ => break Some(lower),
        }
        pick_high = !pick_high;
    };
    targets.iter().for_each(|&t| mark[t] = false);
    result
}

fn odometer(v: &mut [i64], lo: i64, hi: i64) -> bool {
    for k in (0..v.len()).rev() {
        if v[k] < hi {
            v[k] += 1;
            return true;
        }
        v[k] = lo;
    }
    false
}

fn odometer_usize(v: &mut [usize], n: usize) -> bool {
    for k in (0..v.len()).rev() {
        if v[k] + 1 < n {
            v[k] += 1;
            return true;
        }
        v[k] = 0;
    }
    false
}

/// Frequency of the mesoscopic event for each `C`, with `n = floor(N^{1/3})`.
pub fn check_torus_mesoscopic(
    u: f64,
    big_n: usize,
    d: usize,
    c_values: &[f64],
    trials: usize,
    master_seed: u64,
) -> Result<MesoscopicReport> {
    if d < 3 {
        return Err(Error::InvalidParameter("mesoscopic check needs d >= 3".into()));
    }
    if c_values.is_empty() || c_values.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::InvalidParameter("C values must be positive".into()));
    }
    if trials < MIN_TRIALS {
        return Err(Error::InsufficientTrials { needed: MIN_TRIALS, got: trials });
    }
    let spec = ModelSpec::new(Family::TorusVacant { u, n: big_n }, d);
    spec.validate()?;
    let n = (integer_root(big_n as u64, 3) as usize).max(1);
    let c_max = c_values.iter().copied().fold(0.0, f64::max);
    let cap = (c_max * n as f64).ceil() as u64;
    let records = run_trials(master_seed, trials, |t, seed| -> Result<TrialRecord> {
        let c = sample_torus_vacant(u, big_n, d, seed)?;
        let diam = mesoscopic_diameter(&c, n, cap, &mut Bfs::for_config(&c))?;
        let observations = c_values
            .iter()
            .map(|&cc| {
                let holds = diam.is_some_and(|dm| dm != u64::MAX && dm as f64 <= cc * n as f64);
                Observation::with_aux("event", if holds { 1.0 } else { 0.0 }, format!("C={cc}"))
            })
            .collect();
        Ok(TrialRecord { trial: t, seed, observations, excluded: None })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let report = TrialReport::new(Some(spec), master_seed, records);
    let mut order: Vec<usize> = (0..c_values.len()).collect();
    order.sort_by(|&a, &b| c_values[a].total_cmp(&c_values[b]));
    let mut nesting_violations = 0;
    for t in &report.trials {
        let v: Vec<f64> = order.iter().map(|&k| t.observations[k].value).collect();
        if v.windows(2).any(|p| p[0] > p[1]) {
            nesting_violations += 1;
        }
    }
    let frequency = (0..c_values.len())
        .map(|k| summarize(&report.trials.iter().map(|t| t.observations[k].value).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    Ok(MesoscopicReport {
        big_n,
        n,
        density_radius: integer_root(n as u64, d as u32) as usize,
        c_values: c_values.to_vec(),
        frequency,
        nesting_violations,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Window;

    #[test]
    fn integer_roots() {
        assert_eq!(integer_root(26, 3), 2);
        assert_eq!(integer_root(27, 3), 3);
        assert_eq!(integer_root(64, 3), 4);
        assert_eq!(integer_root(1, 3), 1);
        assert_eq!(integer_root(3, 3), 1);
    }

    #[test]
    fn full_torus_diameter_is_d_half_n() {
        for n in [5usize, 8] {
            let c = Config::full(Window::torus(3, n).unwrap());
            let mut bfs = Bfs::for_config(&c);
            assert_eq!(double_sweep_diameter(&c, 0, &mut bfs), 3 * (n / 2) as u64);
            assert_eq!(exact_component_diameter(&c, 7, &mut bfs), 3 * (n / 2) as u64);
        }
        let est = torus_giant_diameter(0.0, 3, &[8], 30, 1).unwrap();
        assert_eq!(est[0].median, 3.0 * 4.0 / 8.0);
    }

    #[test]
    fn double_sweep_never_exceeds_the_exact_diameter() {
        for seed in 0..20 {
            let c = sample_torus_vacant(1.0, 8, 3, seed).unwrap();
            let lab = label_components(&c);
            let mut bfs = Bfs::for_config(&c);
            for comp in 0..lab.num_components() {
                let s = lab.ids().iter().position(|&id| id as usize == comp).unwrap();
                assert!(double_sweep_diameter(&c, s, &mut bfs) <= exact_component_diameter(&c, s, &mut bfs));
            }
        }
    }

    #[test]
    fn double_sweep_is_exact_on_trees() {
        // A comb: spine along axis 0 with teeth along axis 1.
        let w = Window::new_box(vec![0, 0], vec![9, 5]).unwrap();
        let c = Config::from_fn(w.clone(), "comb", 0, |i| {
            let p = w.point_of(i);
            p[1] == 0 || (p[0] % 2 == 0 && p[0] != 4)
        });
        let mut bfs = Bfs::for_config(&c);
        let s = w.index_of(&crate::lattice::Point::from([3, 0])).unwrap();
        assert_eq!(double_sweep_diameter(&c, s, &mut bfs), exact_component_diameter(&c, s, &mut bfs));
    }

    #[test]
    fn capped_set_diameter_matches_all_pairs() {
        for seed in 0..10 {
            let c = sample_torus_vacant(0.6, 9, 3, seed).unwrap();
            let lab = label_components(&c);
            let Some(g) = lab.largest_by_size() else { continue };
            let sites: Vec<usize> = lab.sites_of(g).into_iter().step_by(3).collect();
            let mut bfs = Bfs::for_config(&c);
            let mut want = 0;
            for &a in &sites {
                bfs.sweep(&c, a);
                want = sites.iter().map(|&b| bfs.distance(b).unwrap() as u64).max().unwrap().max(want);
            }
            let mut mark = vec![false; c.window().len()];
            assert_eq!(capped_set_diameter(&c, &sites, 1000, &mut bfs, &mut mark), Some(want));
            if want > 0 {
                assert_eq!(capped_set_diameter(&c, &sites, want - 1, &mut bfs, &mut mark), None);
            }
            assert!(mark.iter().all(|&m| !m));
        }
    }

    #[test]
    fn mesoscopic_extremes() {
        let full = check_torus_mesoscopic(0.0, 27, 3, &[6.0, 8.0], 30, 0).unwrap();
        assert_eq!(full.n, 3);
        assert!(full.frequency.iter().all(|f| f.mean == 1.0));
        let dense = check_torus_mesoscopic(40.0, 8, 3, &[1.0, 6.0, 12.0], 30, 0).unwrap();
        assert!(dense.frequency.iter().all(|f| f.mean <= 0.1));
        let mid = check_torus_mesoscopic(1.0, 27, 3, &[0.5, 2.0, 6.0], 30, 4).unwrap();
        assert_eq!(mid.nesting_violations, 0);
        assert!(mid.frequency.windows(2).all(|f| f[0].mean <= f[1].mean));
    }
}

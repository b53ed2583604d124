use serde::{Deserialize, Serialize};

use super::density::sampler;
use super::report::{run_trials, Observation, TrialRecord, TrialReport};
use super::stats::{summarize, Summary};
use crate::cluster::{label_components, project_onto, s_infty_proxy, Bfs, ProxyPolicy};
use crate::error::{Error, Result};
use crate::lattice::{Config, Point, Window};
use crate::samplers::ModelSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionEstimate {
    pub direction: Vec<i64>,
    /// Summary of `rho(0, n x) / n` for each `n` of the grid.
    pub per_n: Vec<Summary>,
    /// Mean at the largest `n`.
    pub p_hat: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub n_grid: Vec<u64>,
    pub estimate: DirectionEstimate,
    /// Triangle-inequality failures `rho(0, bx) > rho(0, ax) + rho(ax, bx)`.
    pub subadditivity_violations: usize,
    pub report: TrialReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeEstimate {
    pub parameter: f64,
    pub n_grid: Vec<u64>,
    pub directions: Vec<DirectionEstimate>,
    /// `x / p_hat(x)` for each direction.
    pub boundary: Vec<Vec<f64>>,
    /// Counter-clockwise convex hull of the boundary points (d = 2 only).
    pub hull: Option<Vec<[f64; 2]>>,
    /// Largest depth of a boundary point inside the hull of the others.
    pub convexity_violation: Option<f64>,
    /// Largest z-score between directions related by a lattice symmetry.
    pub asymmetry_z: f64,
    pub subadditivity_violations: usize,
    pub report: TrialReport,
}

/// Centered box large enough for every `n x` with the given margin.
pub fn shape_window(d: usize, directions: &[Vec<i64>], n_max: u64, margin: u64) -> Result<Window> {
    let reach = directions.iter().flatten().map(|c| c.unsigned_abs()).max().unwrap_or(0);
    Window::centered(d, (reach * n_max + margin) as usize)
}

fn dir_label(x: &[i64]) -> String {
    x.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";")
}

fn obs_name(x: &[i64], n: u64) -> String {
    format!("rho_over_n[{}]@{}", dir_label(x), n)
}

fn check_inputs(window: &Window, directions: &[Vec<i64>], n_grid: &[u64]) -> Result<()> {
    let d = window.dim();
    if n_grid.is_empty() || n_grid[0] == 0 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("n grid must be positive and strictly increasing".into()));
    }
    let n_max = *n_grid.last().unwrap() as i64;
    for x in directions {
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
        if x.iter().all(|&c| c == 0) {
            return Err(Error::InvalidParameter("zero direction".into()));
        }
        let far = Point::new(x.iter().map(|c| c * n_max).collect());
        if !window.contains(&far) || !window.contains(&Point::origin(d)) {
            return Err(Error::InvalidWindow(format!("window does not contain {far}")));
        }
    }
    Ok(())
}

/// Per-direction `rho(Phi(0), Phi(n x))` over the grid on the largest
/// component, plus the count of triangle-inequality failures.
fn trial_distances(
    config: &Config,
    directions: &[Vec<i64>],
    n_grid: &[u64],
    bfs: &mut Bfs,
) -> Result<Option<(Vec<Vec<u64>>, usize)>> {
    let lab = label_components(config);
    if lab.num_components() == 0 {
        return Ok(None);
    }
    let proxy = s_infty_proxy(config, &lab, ProxyPolicy::Largest)?;
    let w = config.window();
    let d = w.dim();
    let idx = |p: &Point| -> Result<usize> {
        let q = project_onto(&proxy, p)?;
        Ok(w.index_of(&q).expect("projection lies in the window"))
    };
    let origin = idx(&Point::origin(d))?;
    let targets: Vec<Vec<usize>> = directions
        .iter()
        .map(|x| n_grid.iter().map(|&n| idx(&Point::new(x.iter().map(|c| c * n as i64).collect()))).collect())
        .collect::<Result<_>>()?;
    let dist = |bfs: &Bfs, i: usize| bfs.distance(i).map_or(u64::MAX, u64::from);
    bfs.search(&proxy, &[origin], u32::MAX, |_| true, |_| false);
    let rho: Vec<Vec<u64>> = targets.iter().map(|t| t.iter().map(|&i| dist(bfs, i)).collect()).collect();
    let mut violations = 0;
    for (t, r) in targets.iter().zip(&rho) {
        for a in 0..t.len().saturating_sub(1) {
            bfs.search(&proxy, &[t[a]], u32::MAX, |_| true, |_| false);
            for b in a + 1..t.len() {
                if r[b] > r[a].saturating_add(dist(bfs, t[b])) {
                    violations += 1;
                }
            }
        }
    }
    Ok(Some((rho, violations)))
}

fn summarize_direction(report: &TrialReport, x: &[i64], n_grid: &[u64]) -> Result<DirectionEstimate> {
    let per_n: Vec<Summary> =
        n_grid.iter().map(|&n| summarize(&report.values(&obs_name(x, n)))).collect::<Result<_>>()?;
    let last = per_n.last().expect("nonempty grid");
    Ok(DirectionEstimate { direction: x.to_vec(), p_hat: last.mean, stderr: last.stderr, per_n })
}

/// Time constant `p(x)` estimated as `rho(0, n x) / n` on the largest component.
pub fn estimate_norm(
    spec: &ModelSpec,
    window: &Window,
    direction: &[i64],
    n_grid: &[u64],
    trials: usize,
    master_seed: u64,
) -> Result<NormEstimate> {
    let dirs = [direction.to_vec()];
    check_inputs(window, &dirs, n_grid)?;
    let (mut reports, violations) = run_shape_trials(spec, window, &[spec.parameter()], &dirs, n_grid, trials, master_seed)?;
    let report = reports.remove(0);
    Ok(NormEstimate {
        n_grid: n_grid.to_vec(),
        estimate: summarize_direction(&report, direction, n_grid)?,
        subadditivity_violations: violations[0],
        report,
    })
}

fn run_shape_trials(
    spec: &ModelSpec,
    window: &Window,
    params: &[f64],
    directions: &[Vec<i64>],
    n_grid: &[u64],
    trials: usize,
    master_seed: u64,
) -> Result<(Vec<TrialReport>, Vec<usize>)> {
    let s = sampler(spec, window, master_seed)?;
    let per_trial = run_trials(master_seed, trials, |t, seed| -> Result<Vec<(TrialRecord, usize)>> {
        let configs = s.sample_coupled(params, seed)?;
        let mut bfs = Bfs::new(window.len());
        configs
            .iter()
            .map(|c| {
                let mut rec = TrialRecord { trial: t, seed, observations: Vec::new(), excluded: None };
                let Some((rho, v)) = trial_distances(c, directions, n_grid, &mut bfs)? else {
                    rec.excluded = Some("no occupied site".into());
                    return Ok((rec, 0));
                };
                for (x, r) in directions.iter().zip(&rho) {
                    for (&n, &rn) in n_grid.iter().zip(r) {
                        rec.observations.push(Observation::new(obs_name(x, n), rn as f64 / n as f64));
                    }
                }
                Ok((rec, v))
            })
            .collect()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut reports = Vec::with_capacity(params.len());
    let mut violations = Vec::with_capacity(params.len());
    for (k, &x) in params.iter().enumerate() {
        let (records, v): (Vec<_>, Vec<_>) = per_trial.iter().map(|r| r[k].clone()).unzip();
        reports.push(TrialReport::new(Some(spec.with_parameter(x)), master_seed, records));
        violations.push(v.iter().sum());
    }
    Ok((reports, violations))
}

/// Shape estimate for the model's own parameter.
pub fn estimate_shape(
    spec: &ModelSpec,
    window: &Window,
    directions: &[Vec<i64>],
    n_grid: &[u64],
    trials: usize,
    master_seed: u64,
) -> Result<ShapeEstimate> {
    Ok(shape_sweep(spec, window, &[spec.parameter()], directions, n_grid, trials, master_seed)?.remove(0))
}

/// Shape estimates along a parameter list, drawn from shared randomness.
pub fn shape_sweep(
    spec: &ModelSpec,
    window: &Window,
    params: &[f64],
    directions: &[Vec<i64>],
    n_grid: &[u64],
    trials: usize,
    master_seed: u64,
) -> Result<Vec<ShapeEstimate>> {
    let d = window.dim();
    check_inputs(window, directions, n_grid)?;
    if directions.len() < d + 1 || rank(directions) < d {
        return Err(Error::InvalidParameter(format!(
            "need at least {} directions spanning R^{d}",
            d + 1
        )));
    }
    let (reports, violations) = run_shape_trials(spec, window, params, directions, n_grid, trials, master_seed)?;
    params
        .iter()
        .zip(reports)
        .zip(violations)
        .map(|((&parameter, mut report), subadditivity_violations)| {
            let ests: Vec<DirectionEstimate> =
                directions.iter().map(|x| summarize_direction(&report, x, n_grid)).collect::<Result<_>>()?;
            let boundary: Vec<Vec<f64>> =
                ests.iter().map(|e| e.direction.iter().map(|&c| c as f64 / e.p_hat).collect()).collect();
            let finite = ests.iter().all(|e| e.p_hat > 0.0);
            let pts: Vec<[f64; 2]> = boundary.iter().filter(|b| b.len() == 2).map(|b| [b[0], b[1]]).collect();
            let planar = d == 2 && finite;
            for x in directions {
                let names: Vec<String> = n_grid.iter().map(|&n| obs_name(x, n)).collect();
                report.summarize(&names.iter().map(String::as_str).collect::<Vec<_>>())?;
            }
            Ok(ShapeEstimate {
                parameter,
                n_grid: n_grid.to_vec(),
                hull: planar.then(|| convex_hull(&pts)),
                convexity_violation: planar.then(|| convexity_violation(&pts)),
                asymmetry_z: asymmetry(&ests),
                directions: ests,
                boundary,
                subadditivity_violations,
                report,
            })
        })
        .collect()
}

fn rank(vectors: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<f64>> = vectors.iter().map(|v| v.iter().map(|&c| c as f64).collect()).collect();
    let cols = m.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())) else { break };
        if m[p][c].abs() < 1e-9 {
            continue;
        }
        m.swap(r, p);
        for i in r + 1..m.len() {
            let f = m[i][c] / m[r][c];
            for j in c..cols {
                m[i][j] -= f * m[r][j];
            }
        }
        r += 1;
    }
    r
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

const HULL_EPS: f64 = 1e-12;

/// Andrew's monotone chain; collinear points are dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= HULL_EPS {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}

/// Depth of `q` inside a counter-clockwise convex polygon, 0 when outside.
fn depth_inside(hull: &[[f64; 2]], q: [f64; 2]) -> f64 {
    if hull.len() < 3 {
        return 0.0;
    }
    let mut depth = f64::INFINITY;
    for k in 0..hull.len() {
        let (a, b) = (hull[k], hull[(k + 1) % hull.len()]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        depth = depth.min(cross(a, b, q) / len);
    }
    if depth < 1e-9 { 0.0 } else { depth }
}

/// Largest depth of a point strictly inside the hull of the others.
pub fn convexity_violation(points: &[[f64; 2]]) -> f64 {
    (0..points.len())
        .map(|i| {
            let others: Vec<[f64; 2]> =
                points.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &p)| p).collect();
            depth_inside(&convex_hull(&others), points[i])
        })
        .fold(0.0, f64::max)
}

fn related_by_symmetry(a: &[i64], b: &[i64]) -> bool {
    let key = |v: &[i64]| {
        let mut k: Vec<u64> = v.iter().map(|c| c.unsigned_abs()).collect();
        k.sort_unstable();
        k
    };
    key(a) == key(b)
}

fn asymmetry(ests: &[DirectionEstimate]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in ests.iter().enumerate() {
        for b in &ests[i + 1..] {
            if !related_by_symmetry(&a.direction, &b.direction) {
                continue;
            }
            let diff = (a.p_hat - b.p_hat).abs();
            let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
            let z = if diff == 0.0 { 0.0 } else if se == 0.0 { f64::INFINITY } else { diff / se };
            worst = worst.max(z);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirs() -> Vec<Vec<i64>> {
        vec![vec![1, 0], vec![0, 1], vec![-1, 0], vec![0, -1], vec![1, 1], vec![-1, 1], vec![2, 1]]
    }

    #[test]
    fn full_lattice_gives_the_l1_diamond() {
        let grid = [4, 8];
        let w = shape_window(2, &dirs(), 8, 2).unwrap();
        let est = estimate_shape(&ModelSpec::bernoulli(1.0, 2), &w, &dirs(), &grid, 30, 5).unwrap();
        for e in &est.directions {
            let l1: i64 = e.direction.iter().map(|c| c.abs()).sum();
            assert_eq!(e.p_hat, l1 as f64);
            assert_eq!(e.stderr, 0.0);
        }
        let hull = est.hull.unwrap();
        let mut h = hull.clone();
        h.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(h, vec![[-1.0, 0.0], [0.0, -1.0], [0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(est.convexity_violation, Some(0.0));
        assert_eq!(est.asymmetry_z, 0.0);
        assert_eq!(est.subadditivity_violations, 0);
    }

    #[test]
    fn supercritical_norm_is_subadditive_and_at_least_l1() {
        let w = Window::centered(2, 20).unwrap();
        let est = estimate_norm(&ModelSpec::bernoulli(0.8, 2), &w, &[1, 0], &[4, 8, 16], 30, 2).unwrap();
        assert_eq!(est.subadditivity_violations, 0);
        assert!(est.estimate.p_hat >= 1.0 - 0.2, "{}", est.estimate.p_hat);
        assert!(est.estimate.p_hat < 2.0);
    }

    #[test]
    fn hull_and_depth() {
        let sq = [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0], [1.0, 0.0]];
        assert_eq!(convex_hull(&sq), vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]]);
        let pts = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [0.2, 0.2]];
        assert!((convexity_violation(&pts) - (1.0 - 0.4) / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_direction_sets() {
        let w = Window::centered(2, 10).unwrap();
        let spec = ModelSpec::bernoulli(1.0, 2);
        let collinear = vec![vec![1, 0], vec![2, 0], vec![-1, 0]];
        assert!(estimate_shape(&spec, &w, &collinear, &[2], 30, 0).is_err());
        assert!(estimate_shape(&spec, &w, &dirs()[..2], &[2], 30, 0).is_err());
        assert!(estimate_norm(&spec, &w, &[1, 0], &[4, 2], 30, 0).is_err());
    }
}

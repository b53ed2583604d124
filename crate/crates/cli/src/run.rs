//! Experiment execution and artifact writing.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use perco_core::cluster::{chemical_distance, label_components, restrict_s_r, Labelling};
use perco_core::estimators::{
    central_density, check_decorrelation, check_torus_mesoscopic, estimate_chem_stretch, run_trials, sampler,
    shape_sweep, torus_giant_diameter, Observation, TrialRecord, TrialReport,
};
use perco_core::events::EventParams;
use perco_core::renorm::{construct_short_path, min_l0_for_condition_b, short_path_window, verify_recursion_bound};
use perco_core::samplers::{Family, ModelSampler};
use perco_core::{Config, Point, Window};
use serde_json::json;

use crate::config::{Experiment, RunConfig};
use crate::svg::shape_svg;

/// Environment variable naming the config and sample cache directory.
pub const CACHE_ENV: &str = "PERCO_CACHE";

pub struct Outcome {
    pub result: serde_json::Value,
    pub report: TrialReport,
    /// Failed acceptance checks; empty on success.
    pub failures: Vec<String>,
    pub svg: Option<String>,
}

pub fn cache_dir(out: &Path) -> PathBuf {
    std::env::var_os(CACHE_ENV).map(PathBuf::from).unwrap_or_else(|| out.join(".perco-cache"))
}

fn record(trial: usize, seed: u64, observations: Vec<Observation>) -> TrialRecord {
    TrialRecord { trial, seed, observations, excluded: None }
}

fn excluded(trial: usize, seed: u64, reason: impl Into<String>) -> TrialRecord {
    TrialRecord { trial, seed, observations: Vec::new(), excluded: Some(reason.into()) }
}

/// Concatenates reports, tagging every observation's aux field.
fn merge(parts: Vec<(String, TrialReport)>, master_seed: u64) -> TrialReport {
    let spec = parts.first().and_then(|(_, r)| r.spec.clone());
    let mut trials = Vec::new();
    for (tag, r) in parts {
        for mut t in r.trials {
            for o in &mut t.observations {
                o.aux = if o.aux.is_empty() { tag.clone() } else { format!("{tag};{}", o.aux) };
            }
            trials.push(t);
        }
    }
    TrialReport::new(spec, master_seed, trials)
}

fn cached_sample(s: &ModelSampler, cache: &Path, hash: &str, trial: usize, seed: u64) -> Result<Config> {
    let path = cache.join(format!("{hash}-t{trial}.prc1"));
    if let Ok(bytes) = fs::read(&path) {
        if let Ok(c) = Config::read_from(bytes.as_slice()) {
            if c.seed() == seed && c.window() == s.window() {
                return Ok(c);
            }
        }
    }
    let c = s.sample(seed)?;
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, c.to_bytes())?;
    fs::rename(&tmp, &path)?;
    Ok(c)
}

/// `S_R` site closest to `p` in the labelling order, inside `B(0, R)`.
fn nearest_in_s_r(sr: &Config, p: &Point, r: u64) -> Result<Option<Point>> {
    let w = sr.window();
    let ball = w.linf_ball_indices(&Point::origin(w.dim()), r as f64)?;
    Ok(ball
        .into_iter()
        .filter(|&i| sr.is_occupied(i))
        .map(|i| w.point_of(i))
        .min_by(|a, b| Labelling::compare(&(a - p), &(b - p))))
}

fn path_defect(config: &Config, sites: &[usize], x: &Point, y: &Point) -> Option<String> {
    let w = config.window();
    if sites.first().map(|&i| w.point_of(i)) != Some(x.clone()) || sites.last().map(|&i| w.point_of(i)) != Some(y.clone()) {
        return Some("path endpoints differ from x and y".into());
    }
    if let Some(&i) = sites.iter().find(|&&i| !config.is_occupied(i)) {
        return Some(format!("path visits vacant site {}", w.point_of(i)));
    }
    sites
        .windows(2)
        .find(|s| w.l1_distance(&w.point_of(s[0]), &w.point_of(s[1])) != 1)
        .map(|s| format!("path jumps from {} to {}", w.point_of(s[0]), w.point_of(s[1])))
}

pub fn execute(cfg: &RunConfig, cache: &Path) -> Result<Outcome> {
    let seed = cfg.master_seed;
    let trials = cfg.trials;
    let mut failures = Vec::new();
    let mut svg = None;
    let (result, report) = match &cfg.experiment {
        Experiment::Sample { window } => {
            let spec = cfg.model()?;
            let s = sampler(spec, window, seed)?;
            fs::create_dir_all(cache)?;
            let hash = cfg.hash();
            let records = run_trials(seed, trials, |t, ts| -> Result<TrialRecord> {
                let c = cached_sample(&s, cache, &hash, t, ts)?;
                let lab = label_components(&c);
                let largest = lab.largest_by_size().map_or(0, |g| lab.size(g));
                Ok(record(
                    t,
                    ts,
                    vec![
                        Observation::new("density", c.density()),
                        Observation::new("components", lab.num_components() as f64),
                        Observation::new("largest_size", largest as f64),
                    ],
                ))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            (json!({ "samples": trials }), TrialReport::new(Some(spec.clone()), seed, records))
        }
        Experiment::Clusters { window, r } => {
            let spec = cfg.model()?;
            let s = sampler(spec, window, seed)?;
            let records = run_trials(seed, trials, |t, ts| -> Result<TrialRecord> {
                let c = s.sample(ts)?;
                let lab = label_components(&c);
                let (size, diam) = lab.largest_by_size().map_or((0, 0), |g| (lab.size(g), lab.diameter(g)));
                let sr = restrict_s_r(&c, &lab, *r);
                let mut obs = vec![
                    Observation::new("components", lab.num_components() as f64),
                    Observation::new("largest_size", size as f64),
                    Observation::new("largest_diameter", diam as f64),
                    Observation::new("s_r_fraction", sr.occupied_count() as f64 / window.len() as f64),
                ];
                if !window.is_torus() {
                    obs.push(Observation::new("eta_central", central_density(&c)?));
                }
                Ok(record(t, ts, obs))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let mut report = TrialReport::new(Some(spec.clone()), seed, records);
            let names: &[&str] = if window.is_torus() {
                &["components", "largest_size", "s_r_fraction"]
            } else {
                &["components", "largest_size", "s_r_fraction", "eta_central"]
            };
            // Summaries need enough trials; small sample runs just skip them.
            let _ = report.summarize(names);
            (json!({ "summary": report.summary }), report)
        }
        Experiment::Stretch { window, r } => {
            let est = estimate_chem_stretch(cfg.model()?, window, *r, trials, seed)?;
            (serde_json::to_value(&est)?, est.report)
        }
        Experiment::Shape { window, directions, n_grid, sweep } => {
            let spec = cfg.model()?;
            let params = if sweep.is_empty() { vec![spec.parameter()] } else { sweep.clone() };
            let ests = shape_sweep(spec, window, &params, directions, n_grid, trials, seed)?;
            for e in &ests {
                if e.subadditivity_violations > 0 {
                    failures.push(format!(
                        "{} subadditivity violations at parameter {}",
                        e.subadditivity_violations, e.parameter
                    ));
                }
            }
            svg = shape_svg(&ests);
            let report = merge(ests.iter().map(|e| (format!("param={}", e.parameter), e.report.clone())).collect(), seed);
            (serde_json::to_value(&ests)?, report)
        }
        Experiment::RenormValidate { d, p0_exponent } => {
            let params = cfg.ladder.context("renorm-validate needs a `ladder`")?;
            let profile = cfg.profile()?;
            let rep = verify_recursion_bound(&params, profile, *d, *p0_exponent);
            let min_l0 = min_l0_for_condition_b(&params, profile, *d, 1 << 40);
            if !rep.all_pass {
                failures.push(format!("induction fails first at level {:?}", rep.first_failure()));
            }
            let mut obs = Vec::new();
            for lv in &rep.levels {
                obs.push(Observation::with_aux("slack_a", lv.cond_a.slack, format!("k={}", lv.k)));
                obs.push(Observation::with_aux("slack_b", lv.cond_b.slack, format!("k={}", lv.k)));
            }
            obs.push(Observation::new("all_pass", if rep.all_pass { 1.0 } else { 0.0 }));
            let report = TrialReport::new(None, seed, vec![record(0, seed, obs)]);
            (json!({ "report": rep, "min_L0_condition_b": min_l0 }), report)
        }
        Experiment::RenormPath { x, y, r, eta_hat } => {
            let spec = cfg.model()?;
            let ladder = cfg.ladder()?;
            let window: Window = short_path_window(*r, &ladder, spec.d)?;
            let s = sampler(spec, &window, seed)?;
            let params = EventParams { big_l0: ladder.big_l[0], eta_hat: *eta_hat, u: spec.parameter() };
            let per_trial = run_trials(seed, trials, |t, ts| -> Result<(TrialRecord, Option<String>)> {
                let c = s.sample(ts)?;
                let sr = restrict_s_r(&c, &label_components(&c), *r);
                let (Some(xe), Some(ye)) = (nearest_in_s_r(&sr, x, *r)?, nearest_in_s_r(&sr, y, *r)?) else {
                    return Ok((excluded(t, ts, "S_R misses B(0, R)"), None));
                };
                let sp = match construct_short_path(&c, &xe, &ye, *r, &ladder, &params) {
                    Ok(sp) => sp,
                    Err(e) => return Ok((excluded(t, ts, e.to_string()), Some(format!("trial {t}: {e}")))),
                };
                let cert = &sp.certificate;
                let mut obs = vec![Observation::with_aux(
                    "h_holds",
                    if cert.h_status.holds() { 1.0 } else { 0.0 },
                    cert.h_status.diagnostic().unwrap_or_default(),
                )];
                if !cert.h_status.holds() {
                    return Ok((record(t, ts, obs), None));
                }
                let len = sp.sites.len() as u64 - 1;
                let bfs = chemical_distance(&c, &xe, &ye)?;
                obs.push(Observation::new("path_length", len as f64));
                obs.push(Observation::new("length_bound", cert.length_bound as f64));
                obs.push(Observation::new("bfs_distance", bfs.map_or(f64::INFINITY, |b| b as f64)));
                let mut defect = path_defect(&c, &sp.sites, &xe, &ye);
                if (len as u128) > cert.length_bound {
                    defect = Some(format!("length {len} exceeds bound {}", cert.length_bound));
                }
                if bfs.is_none_or(|b| b > len) {
                    defect = Some(format!("BFS distance {bfs:?} exceeds path length {len}"));
                }
                Ok((record(t, ts, obs), defect.map(|d| format!("trial {t}: {d}"))))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let (records, defects): (Vec<_>, Vec<_>) = per_trial.into_iter().unzip();
            failures.extend(defects.into_iter().flatten());
            let report = TrialReport::new(Some(spec.clone()), seed, records);
            let holds: Vec<f64> = report.values("h_holds");
            let rate = holds.iter().sum::<f64>() / holds.len().max(1) as f64;
            (json!({ "window": window, "h_rate": rate, "trials": trials }), report)
        }
        Experiment::Decorr { test } => {
            let rep = check_decorrelation(cfg.model()?, test, cfg.profile()?, trials, seed)?;
            if !rep.holds {
                failures.push(format!("lhs - rhs = {} above {} stderr", rep.diff, rep.diff_stderr));
            }
            if rep.monotonicity_violations > 0 {
                failures.push(format!("{} coupled samples out of order", rep.monotonicity_violations));
            }
            (serde_json::to_value(&rep)?, rep.report)
        }
        Experiment::Torus { u, d, n_grid } => {
            let per_n = torus_giant_diameter(*u, *d, n_grid, trials, seed)?;
            let report = merge(per_n.iter().map(|e| (format!("N={}", e.n), e.report.clone())).collect(), seed);
            (serde_json::to_value(&per_n)?, report)
        }
        Experiment::Mesoscopic { c_values } => {
            let spec = cfg.model()?;
            let Family::TorusVacant { u, n } = spec.model else { bail!("mesoscopic runs need the torus_vacant model") };
            let rep = check_torus_mesoscopic(u, n, spec.d, c_values, trials, seed)?;
            if rep.nesting_violations > 0 {
                failures.push(format!("{} trials violate nesting in C", rep.nesting_violations));
            }
            (serde_json::to_value(&rep)?, rep.report)
        }
    };
    Ok(Outcome { result, report, failures, svg })
}

/// Writes `run.json`, `observables.csv` and, for planar shapes, `shape.svg`.
/// The resolved config is cached under its hash.
pub fn write_artifacts(cfg: &RunConfig, outcome: &Outcome, out: &Path, cache: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::create_dir_all(cache).with_context(|| format!("creating {}", cache.display()))?;
    let hash = cfg.hash();
    let resolved = serde_json::to_string_pretty(&cfg.resolved())?;
    fs::write(cache.join(format!("config-{hash}.json")), &resolved)?;
    let run = json!({
        "config": cfg.resolved(),
        "config_hash": hash,
        "kind": cfg.experiment.name(),
        "seeds": outcome.report.seeds(),
        "result": outcome.result,
        "check": { "passed": outcome.failures.is_empty(), "failures": outcome.failures },
    });
    fs::write(out.join("run.json"), serde_json::to_string_pretty(&run)? + "\n")?;
    let mut csv = Vec::new();
    writeln!(csv, "# config_hash={hash}")?;
    outcome.report.write_csv(&mut csv)?;
    fs::write(out.join("observables.csv"), csv)?;
    if let Some(svg) = &outcome.svg {
        let tagged = svg.replacen("<svg ", &format!("<svg data-config-hash=\"{hash}\" "), 1);
        fs::write(out.join("shape.svg"), tagged)?;
    }
    Ok(())
}

//! Run configuration: one JSON document per experiment.
//!
//! Scientific parameters have no defaults. Only engineering knobs (output
//! directory, worker count, cache location) may be omitted.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use perco_core::estimators::{DecorrelationParams, MIN_TRIALS};
use perco_core::renorm::{select_top_scale, short_path_window, LadderParams, RegularityProfile, ScaleLadder};
use perco_core::samplers::{Family, ModelSpec};
use perco_core::{Point, Window};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    /// Draw samples and record occupancy statistics.
    Sample { window: Window },
    /// Component statistics and the density of `S_r`.
    Clusters { window: Window, r: u64 },
    Stretch {
        window: Window,
        #[serde(rename = "R")]
        r: u64,
    },
    Shape {
        window: Window,
        directions: Vec<Vec<i64>>,
        n_grid: Vec<u64>,
        /// Parameter values for a coupled sweep; absent for a single run.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        sweep: Vec<f64>,
    },
    RenormValidate {
        d: usize,
        p0_exponent: Option<f64>,
    },
    RenormPath {
        x: Point,
        y: Point,
        #[serde(rename = "R")]
        r: u64,
        eta_hat: f64,
    },
    Decorr { test: DecorrelationParams },
    Torus { u: f64, d: usize, n_grid: Vec<usize> },
    Mesoscopic { c_values: Vec<f64> },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Sample { .. } => "sample",
            Experiment::Clusters { .. } => "clusters",
            Experiment::Stretch { .. } => "stretch",
            Experiment::Shape { .. } => "shape",
            Experiment::RenormValidate { .. } => "renorm-validate",
            Experiment::RenormPath { .. } => "renorm-path",
            Experiment::Decorr { .. } => "decorr",
            Experiment::Torus { .. } => "torus",
            Experiment::Mesoscopic { .. } => "mesoscopic",
        }
    }

    fn needs_model(&self) -> bool {
        !matches!(self, Experiment::RenormValidate { .. } | Experiment::Torus { .. })
    }

    fn needs_ladder(&self) -> bool {
        matches!(self, Experiment::RenormValidate { .. } | Experiment::RenormPath { .. })
    }

    fn needs_profile(&self) -> bool {
        matches!(self, Experiment::RenormValidate { .. } | Experiment::Decorr { .. })
    }

    fn is_statistical(&self) -> bool {
        !matches!(self, Experiment::Sample { .. } | Experiment::Clusters { .. } | Experiment::RenormValidate { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<LadderParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<RegularityProfile>,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Parses JSON, reporting schema violations with their field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            anyhow::anyhow!("at `{path}`: {}", e.into_inner())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// The config with engineering knobs stripped, as hashed and cached.
    pub fn resolved(&self) -> RunConfig {
        RunConfig { output_dir: None, ..self.clone() }
    }

    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.resolved()).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn model(&self) -> Result<&ModelSpec> {
        self.model.as_ref().context("this experiment needs a `model`")
    }

    pub fn ladder(&self) -> Result<ScaleLadder> {
        Ok(ScaleLadder::build(*self.ladder.as_ref().context("this experiment needs a `ladder`")?)?)
    }

    pub fn profile(&self) -> Result<&RegularityProfile> {
        self.profile.as_ref().context("this experiment needs a `profile`")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Static checks of a config; never samples.
pub fn diagnose(cfg: &RunConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |field: &str, message: String| out.push(Diagnostic { field: field.into(), message });
    let exp = &cfg.experiment;

    let model = cfg.model.as_ref();
    match (exp.needs_model(), model) {
        (true, None) => push("model", format!("`{}` needs a model", exp.name())),
        (false, Some(_)) => push("model", format!("`{}` takes no model", exp.name())),
        (_, Some(m)) => {
            if let Err(e) = m.validate() {
                push("model", e.to_string());
            }
        }
        _ => {}
    }
    if exp.needs_profile() {
        match &cfg.profile {
            None => push("profile", format!("`{}` needs a regularity profile", exp.name())),
            Some(p) => {
                if let Err(e) = p.validate() {
                    push("profile", e.to_string());
                }
            }
        }
    }
    let mut ladder = None;
    if exp.needs_ladder() {
        match &cfg.ladder {
            None => push("ladder", format!("`{}` needs ladder parameters", exp.name())),
            Some(p) => {
                if p.l0 <= 4 * p.r0 {
                    push(
                        "ladder.l0",
                        format!("l0 = {} must exceed 4 r0 = {}; path descent needs l0 > 4 r0", p.l0, 4 * p.r0),
                    );
                }
                // The induction check works in log space; only path runs build the ladder.
                let build = matches!(exp, Experiment::RenormPath { .. });
                match ScaleLadder::build(*p) {
                    Ok(l) if build => {
                        if let Some(k) = (0..=l.kmax()).find(|&k| l.l[k] <= l.r[k]) {
                            push("ladder", format!("l_{k} = {} must exceed r_{k} = {}", l.l[k], l.r[k]));
                        }
                        ladder = Some(l);
                    }
                    Err(e) if build && p.l0 > 4 * p.r0 => push("ladder", e.to_string()),
                    _ => {}
                }
            }
        }
    }
    if exp.is_statistical() && cfg.trials < MIN_TRIALS {
        push("trials", format!("{} trials; estimators need at least {MIN_TRIALS}", cfg.trials));
    }
    if cfg.trials == 0 {
        push("trials", "at least one trial is required".into());
    }

    let d = model.map(|m| m.d);
    let check_window = |w: &Window, push: &mut dyn FnMut(&str, String)| {
        if let Some(d) = d {
            if w.dim() != d {
                push("experiment.window", format!("window has dimension {}, model has d = {d}", w.dim()));
                return false;
            }
        }
        if model.is_some_and(|m| m.torus_window().is_some()) != w.is_torus() {
            push("experiment.window", "torus models need a torus window and box models a box window".into());
            return false;
        }
        true
    };
    match exp {
        Experiment::Sample { window } => {
            check_window(window, &mut push);
        }
        Experiment::Clusters { window, .. } => {
            check_window(window, &mut push);
        }
        Experiment::Stretch { window, r } => {
            if *r == 0 {
                push("experiment.R", "R must be positive".into());
            } else if check_window(window, &mut push) {
                let rr = *r as i64;
                if !window.covers_box(&vec![-2 * rr; window.dim()], 4 * rr + 1) {
                    push("experiment.window", format!("window does not cover B(0, 2R) = [-{}, {}]^d", 2 * r, 2 * r));
                }
            }
        }
        Experiment::Shape { window, directions, n_grid, sweep } => {
            if n_grid.is_empty() || n_grid[0] == 0 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
                push("experiment.n_grid", "n grid must be positive and strictly increasing".into());
            }
            if check_window(window, &mut push) {
                let n_max = n_grid.last().copied().unwrap_or(0) as i64;
                for (k, x) in directions.iter().enumerate() {
                    let field = format!("experiment.directions[{k}]");
                    if x.len() != window.dim() {
                        push(&field, format!("direction has dimension {}", x.len()));
                    } else if x.iter().all(|&c| c == 0) {
                        push(&field, "zero direction".into());
                    } else if !window.contains(&Point::new(x.iter().map(|c| c * n_max).collect())) {
                        push(&field, format!("window does not contain {n_max} x"));
                    }
                }
            }
            if directions.len() <= window.dim() {
                push("experiment.directions", format!("need at least {} directions", window.dim() + 1));
            }
            if let Some(m) = model {
                for (k, &v) in sweep.iter().enumerate() {
                    if let Err(e) = m.with_parameter(v).validate() {
                        push(&format!("experiment.sweep[{k}]"), e.to_string());
                    }
                }
            }
        }
        Experiment::RenormValidate { d, .. } => {
            if *d < 2 {
                push("experiment.d", "d must be at least 2".into());
            }
        }
        Experiment::RenormPath { x, y, r, eta_hat } => {
            if !(*eta_hat > 0.0 && *eta_hat <= 1.0) {
                push("experiment.eta_hat", format!("eta_hat = {eta_hat} outside (0, 1]"));
            }
            for (name, p) in [("experiment.x", x), ("experiment.y", y)] {
                if d.is_some_and(|d| p.dim() != d) {
                    push(name, format!("point has dimension {}", p.dim()));
                } else if p.linf_norm() > *r {
                    push(name, format!("{p} lies outside B(0, R)"));
                }
            }
            if model.is_some_and(|m| m.torus_window().is_some()) {
                push("model", "short paths need a box model".into());
            }
            if let (Some(l), Some(d)) = (&ladder, d) {
                if let Err(e) = select_top_scale(l, *r, d) {
                    push("ladder.kmax", e.to_string());
                } else if let Err(e) = short_path_window(*r, l, d) {
                    push("experiment.R", e.to_string());
                }
            }
        }
        Experiment::Decorr { test } => {
            if test.separation < test.r.saturating_mul(test.l) {
                push(
                    "experiment.test.separation",
                    format!("{} is below R L = {}", test.separation, test.r.saturating_mul(test.l)),
                );
            }
            if test.events.0.is_increasing() != test.events.1.is_increasing() {
                push("experiment.test.events", "events must be both increasing or both decreasing".into());
            }
        }
        Experiment::Torus { u, d, n_grid } => {
            if *d < 3 {
                push("experiment.d", "torus experiments need d >= 3".into());
            }
            if !(*u >= 0.0) || !u.is_finite() {
                push("experiment.u", format!("u = {u} must be finite and nonnegative"));
            }
            if n_grid.is_empty() || n_grid[0] < 4 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
                push("experiment.n_grid", "N grid must start at 4 or more and strictly increase".into());
            }
        }
        Experiment::Mesoscopic { c_values } => {
            if !matches!(model.map(|m| &m.model), Some(Family::TorusVacant { .. }) | None) {
                push("model", "mesoscopic runs need the torus_vacant model".into());
            }
            if model.is_some_and(|m| m.d < 3) {
                push("model.d", "mesoscopic runs need d >= 3".into());
            }
            if c_values.is_empty() || c_values.iter().any(|&c| !(c > 0.0)) {
                push("experiment.c_values", "C values must be positive".into());
            }
        }
    }
    out
}

//! Seed events, local-uniqueness events and the cascaded good/bad fields.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{label_components, restrict_s_r, BoxComponents};
use crate::error::{Error, Result};
use crate::lattice::{BitField, Config, Point, Window};
use crate::renorm::ScaleLadder;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventParams {
    #[serde(rename = "L0")]
    pub big_l0: u64,
    /// Plug-in estimate of the density of the infinite cluster.
    pub eta_hat: f64,
    pub u: f64,
}

impl EventParams {
    pub fn validate(&self) -> Result<()> {
        if self.big_l0 < 2 {
            return Err(Error::InvalidParameter(format!("L0 = {} must be at least 2", self.big_l0)));
        }
        if !(self.eta_hat > 0.0 && self.eta_hat <= 1.0) {
            return Err(Error::InvalidParameter(format!("eta_hat = {} outside (0, 1]", self.eta_hat)));
        }
        Ok(())
    }

    /// `ceil(3/4 eta L0^d)`: minimum size of a large component in a subbox.
    pub fn min_component(&self, d: usize) -> u64 {
        (0.75 * self.eta_hat * (self.big_l0 as f64).powi(d as i32)).ceil() as u64
    }

    /// `floor(5/4 eta L0^d)`: maximum count of `S_{L0}` sites in a subbox.
    pub fn max_count(&self, d: usize) -> u64 {
        (1.25 * self.eta_hat * (self.big_l0 as f64).powi(d as i32)).floor() as u64
    }
}

/// Shared per-configuration data for seed events: the set `S_{L0}`.
pub struct SeedContext<'a> {
    config: &'a Config,
    s_l0: BitField,
    params: EventParams,
}

impl<'a> SeedContext<'a> {
    pub fn new(config: &'a Config, params: EventParams) -> Result<Self> {
        params.validate()?;
        let lab = label_components(config);
        let s_l0 = restrict_s_r(config, &lab, params.big_l0).occupancy().clone();
        Ok(SeedContext { config, s_l0, params })
    }

    pub fn params(&self) -> &EventParams {
        &self.params
    }

    pub fn config(&self) -> &'a Config {
        self.config
    }

    pub fn s_l0(&self) -> &BitField {
        &self.s_l0
    }

    fn check_support(&self, x: &[i64]) -> Result<()> {
        let l0 = self.params.big_l0 as i64;
        let lo: Vec<i64> = x.iter().map(|c| c - l0).collect();
        if !self.config.window().covers_box(&lo, 4 * l0) {
            return Err(Error::OutsideWindow(format!("{} + [-L0, 3L0)^d", Point::new(x.to_vec()))));
        }
        Ok(())
    }

    /// Large components of `S_{L0}` in each of the `2^d` subboxes, as one
    /// representative site (absolute coordinates) per component, and the
    /// `S_{L0}` count of each subbox.
    fn subboxes(&self, x: &[i64]) -> Result<Vec<(Vec<Vec<i64>>, u64)>> {
        let w = self.config.window();
        let d = w.dim();
        let l0 = self.params.big_l0 as i64;
        let min_size = self.params.min_component(d);
        let mut out = Vec::with_capacity(1 << d);
        for mask in 0..1usize << d {
            let lo: Vec<i64> = (0..d).map(|i| x[i] + l0 * ((mask >> i) & 1) as i64).collect();
            let bc = BoxComponents::cube(w, &lo, l0 as usize, |g| self.s_l0.get(g))?;
            let count: u64 = bc.sizes.iter().map(|&s| s as u64).sum();
            let mut reps: Vec<Option<Vec<i64>>> =
                bc.sizes.iter().map(|&s| if s as u64 >= min_size { Some(Vec::new()) } else { None }).collect();
            let mut c = vec![0i64; d];
            for (i, &lab) in bc.labels.iter().enumerate() {
                if lab != crate::cluster::NO_COMPONENT {
                    if let Some(r) = reps[lab as usize].as_mut().filter(|r| r.is_empty()) {
                        bc.local.coords_into(i, &mut c);
                        r.extend_from_slice(&c);
                    }
                }
            }
            out.push((reps.into_iter().flatten().collect(), count));
        }
        Ok(out)
    }

    /// Both seed events at `x`: `(A, B)`.
    pub fn seed_events(&self, x: &[i64]) -> Result<(bool, bool)> {
        self.check_support(x)?;
        let d = self.config.window().dim();
        let subs = self.subboxes(x)?;
        let max_count = self.params.max_count(d);
        let b = subs.iter().all(|(_, c)| *c <= max_count);
        let a = subs.iter().all(|(reps, _)| !reps.is_empty()) && {
            let l0 = self.params.big_l0 as usize;
            let big = BoxComponents::cube(self.config.window(), x, 2 * l0, |g| self.config.is_occupied(g))?;
            let mut labels = subs.iter().flat_map(|(reps, _)| reps.iter()).map(|r| big.label_at(r));
            let first = labels.next().flatten();
            first.is_some() && labels.all(|l| l == first)
        };
        Ok((a, b))
    }
}

pub fn event_a(config: &Config, x: &Point, params: &EventParams) -> Result<bool> {
    Ok(SeedContext::new(config, *params)?.seed_events(x.coords())?.0)
}

pub fn event_b(config: &Config, x: &Point, params: &EventParams) -> Result<bool> {
    Ok(SeedContext::new(config, *params)?.seed_events(x.coords())?.1)
}

fn require_ball(window: &Window, radius: u64) -> Result<()> {
    let r = radius as i64;
    let lo = vec![-r; window.dim()];
    if !window.covers_box(&lo, 2 * r + 1) {
        return Err(Error::InvalidWindow(format!("window does not cover B(0, {radius})")));
    }
    Ok(())
}

/// Some site of `B(0, R)` lies in a component of l1-diameter at least `R`.
pub fn event_crossing(config: &Config, r: u64) -> Result<bool> {
    let w = config.window();
    require_ball(w, r)?;
    let lab = label_components(config);
    let ball = w.linf_ball_indices(&Point::origin(w.dim()), r as f64)?;
    Ok(ball.iter().any(|&i| lab.component_of(i).is_some_and(|c| lab.diameter(c) >= r)))
}

/// All sites of `S_{R/10}` in `B(0, R)` are connected inside `B(0, 2R)`.
pub fn event_local_uniqueness(config: &Config, r: u64) -> Result<bool> {
    let w = config.window();
    require_ball(w, 2 * r)?;
    let d = w.dim();
    let lab = label_components(config);
    let min_diam = r.div_ceil(10);
    let outer = BoxComponents::cube(w, &vec![-2 * r as i64; d], 4 * r as usize + 1, |g| config.is_occupied(g))?;
    let mut common = None;
    for i in w.linf_ball_indices(&Point::origin(d), r as f64)? {
        if lab.component_of(i).is_some_and(|c| lab.diameter(c) >= min_diam) {
            let l = outer.label_of_global(w, i);
            match common {
                None => common = Some(l),
                Some(c) if c != l => return Ok(false),
                _ => {}
            }
        }
    }
    Ok(true)
}

/// A boolean field on `origin + spacing * [0, extents)`, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoolGrid {
    pub spacing: u64,
    pub origin: Vec<i64>,
    pub extents: Vec<usize>,
    pub values: Vec<bool>,
}

impl BoolGrid {
    pub fn new(spacing: u64, origin: Vec<i64>, extents: Vec<usize>, values: Vec<bool>) -> Result<Self> {
        if values.len() != extents.iter().product::<usize>() || origin.len() != extents.len() {
            return Err(Error::InvalidParameter("grid values do not match extents".into()));
        }
        Ok(BoolGrid { spacing, origin, extents, values })
    }

    pub fn filled(spacing: u64, origin: Vec<i64>, extents: Vec<usize>, v: bool) -> Self {
        let n = extents.iter().product();
        BoolGrid { spacing, origin, extents, values: vec![v; n] }
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn coords_of(&self, idx: usize) -> Vec<i64> {
        let mut c = vec![0; self.dim()];
        let mut r = idx;
        for a in (0..self.dim()).rev() {
            c[a] = self.origin[a] + (r % self.extents[a]) as i64 * self.spacing as i64;
            r /= self.extents[a];
        }
        c
    }

    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        let s = self.spacing as i64;
        let mut idx = 0usize;
        for a in 0..self.dim() {
            let off = x[a] - self.origin[a];
            if off < 0 || off % s != 0 || off / s >= self.extents[a] as i64 {
                return None;
            }
            idx = idx * self.extents[a] + (off / s) as usize;
        }
        Some(idx)
    }

    pub fn get(&self, x: &[i64]) -> Option<bool> {
        self.index_of(x).map(|i| self.values[i])
    }

    pub fn count_true(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }

    /// Run-length encoding: alternating run lengths starting with `false`.
    pub fn runs(&self) -> Vec<usize> {
        let mut runs = Vec::new();
        let mut cur = false;
        let mut n = 0;
        for &v in &self.values {
            if v == cur {
                n += 1;
            } else {
                runs.push(n);
                cur = v;
                n = 1;
            }
        }
        runs.push(n);
        runs
    }
}

fn ceil_to(x: i64, m: i64) -> i64 {
    x.div_euclid(m) * m + if x.rem_euclid(m) == 0 { 0 } else { m }
}

fn floor_to(x: i64, m: i64) -> i64 {
    x.div_euclid(m) * m
}

/// Geometry of the level-`k` grid whose blocks are covered by `prev`.
fn next_grid_geometry(prev: &BoolGrid, big_l_k: u64) -> Option<(Vec<i64>, Vec<usize>)> {
    let s = big_l_k as i64;
    let mut origin = Vec::with_capacity(prev.dim());
    let mut extents = Vec::with_capacity(prev.dim());
    for a in 0..prev.dim() {
        let first = prev.origin[a];
        let last = first + (prev.extents[a] as i64 - 1) * prev.spacing as i64;
        let o = ceil_to(first, s);
        let top = floor_to(last - s + prev.spacing as i64, s);
        if top < o {
            return None;
        }
        origin.push(o);
        extents.push(((top - o) / s + 1) as usize);
    }
    Some((origin, extents))
}

/// One cascade step: level `k` is true at `x` iff the true level-`(k-1)` sites
/// in `x + [0, L_k)^d` have l-infinity diameter above `r_{k-1} L_{k-1}`.
pub fn cascade_step(prev: &BoolGrid, ladder: &ScaleLadder, k: usize) -> Result<BoolGrid> {
    let big_l_k = ladder.big_l[k];
    if prev.spacing != ladder.big_l[k - 1] {
        return Err(Error::InvalidParameter(format!("grid spacing {} is not L_{}", prev.spacing, k - 1)));
    }
    let (origin, extents) = next_grid_geometry(prev, big_l_k)
        .ok_or_else(|| Error::InvalidWindow(format!("level {k} has no complete block inside the field")))?;
    let d = prev.dim();
    let threshold = (ladder.r[k - 1] * ladder.big_l[k - 1]) as i64;
    let block = ladder.l[k - 1] as usize;
    let n: usize = extents.iter().product();
    let values: Vec<bool> = (0..n)
        .into_par_iter()
        .map(|idx| {
            let mut r = idx;
            let mut x = vec![0i64; d];
            for a in (0..d).rev() {
                x[a] = origin[a] + (r % extents[a]) as i64 * big_l_k as i64;
                r /= extents[a];
            }
            let base = prev.index_of(&x).expect("block corner lies in the previous grid");
            let mut lo = vec![i64::MAX; d];
            let mut hi = vec![i64::MIN; d];
            let mut j = vec![0usize; d];
            'scan: loop {
                let mut pidx = base;
                let mut stride = 1;
                for a in (0..d).rev() {
                    pidx += j[a] * stride;
                    stride *= prev.extents[a];
                }
                if prev.values[pidx] {
                    for a in 0..d {
                        let c = j[a] as i64;
                        lo[a] = lo[a].min(c);
                        hi[a] = hi[a].max(c);
                    }
                }
                let mut a = d;
                loop {
                    if a == 0 {
                        break 'scan;
                    }
                    a -= 1;
                    j[a] += 1;
                    if j[a] < block {
                        break;
                    }
                    j[a] = 0;
                }
            }
            (0..d).any(|a| hi[a] >= lo[a] && (hi[a] - lo[a]) * prev.spacing as i64 > threshold)
        })
        .collect();
    BoolGrid::new(big_l_k, origin, extents, values)
}

/// Levels `0..=top` of the cascade started from `seed` on the level-0 grid.
pub fn cascade_field(seed: &BoolGrid, ladder: &ScaleLadder, top: usize) -> Result<Vec<BoolGrid>> {
    if top > ladder.kmax() {
        return Err(Error::Ladder(format!("level {top} exceeds kmax = {}", ladder.kmax())));
    }
    let mut out = vec![seed.clone()];
    for k in 1..=top {
        let next = cascade_step(&out[k - 1], ladder, k)?;
        out.push(next);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodnessLevel {
    pub k: usize,
    pub a_bar: BoolGrid,
    pub b_bar: BoolGrid,
    pub good: BoolGrid,
}

/// Per-level cascaded bad events and `k`-goodness.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodnessField {
    pub levels: Vec<GoodnessLevel>,
}

impl GoodnessField {
    /// Builds the field from level-0 bad-event grids.
    pub fn from_seeds(a_bar0: BoolGrid, b_bar0: BoolGrid, ladder: &ScaleLadder, top: usize) -> Result<Self> {
        let a = cascade_field(&a_bar0, ladder, top)?;
        let b = cascade_field(&b_bar0, ladder, top)?;
        let levels = a
            .into_iter()
            .zip(b)
            .enumerate()
            .map(|(k, (a_bar, b_bar))| {
                let values = a_bar.values.iter().zip(&b_bar.values).map(|(x, y)| !x && !y).collect();
                let good = BoolGrid { values, ..a_bar.clone() };
                GoodnessLevel { k, a_bar, b_bar, good }
            })
            .collect();
        Ok(GoodnessField { levels })
    }

    pub fn top(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> &GoodnessLevel {
        &self.levels[k]
    }

    pub fn is_good(&self, k: usize, x: &[i64]) -> Option<bool> {
        self.levels.get(k)?.good.get(x)
    }

    /// Text dump: a header per level and field, then run lengths.
    pub fn write_rle(&self, mut w: impl Write) -> std::io::Result<()> {
        for lv in &self.levels {
            for (name, g) in [("A_bar", &lv.a_bar), ("B_bar", &lv.b_bar), ("good", &lv.good)] {
                let join = |v: &[String]| v.join(",");
                writeln!(
                    w,
                    "level={} L={} field={} origin={} extents={}",
                    lv.k,
                    g.spacing,
                    name,
                    join(&g.origin.iter().map(|c| c.to_string()).collect::<Vec<_>>()),
                    join(&g.extents.iter().map(|c| c.to_string()).collect::<Vec<_>>()),
                )?;
                let runs: Vec<String> = g.runs().iter().map(|r| r.to_string()).collect();
                writeln!(w, "{}", runs.join(" "))?;
            }
        }
        Ok(())
    }
}

/// Level-0 grid of anchors `x in L0 Z^d` with `x + [-L0, 3L0)^d` in the window.
pub fn level0_grid(window: &Window, big_l0: u64) -> Result<(Vec<i64>, Vec<usize>)> {
    if window.is_torus() {
        return Err(Error::InvalidWindow("goodness fields are evaluated on box windows".into()));
    }
    let l0 = big_l0 as i64;
    let mut origin = Vec::new();
    let mut extents = Vec::new();
    for a in 0..window.dim() {
        let lo = window.anchor()[a];
        let hi = lo + window.sides()[a] as i64;
        let first = ceil_to(lo + l0, l0);
        let last = floor_to(hi - 3 * l0, l0);
        if last < first {
            return Err(Error::InvalidWindow(format!("window side {} fits no level-0 block", window.sides()[a])));
        }
        origin.push(first);
        extents.push(((last - first) / l0 + 1) as usize);
    }
    Ok((origin, extents))
}

/// Good/bad fields of `config` up to level `top`.
pub fn goodness_field_to(config: &Config, ladder: &ScaleLadder, params: &EventParams, top: usize) -> Result<GoodnessField> {
    if params.big_l0 != ladder.big_l[0] {
        return Err(Error::InvalidParameter(format!(
            "event L0 = {} differs from ladder L0 = {}",
            params.big_l0, ladder.big_l[0]
        )));
    }
    let ctx = SeedContext::new(config, *params)?;
    let (origin, extents) = level0_grid(config.window(), params.big_l0)?;
    let proto = BoolGrid::filled(params.big_l0, origin, extents, false);
    let seeds: Vec<(bool, bool)> = (0..proto.len())
        .into_par_iter()
        .map(|i| ctx.seed_events(&proto.coords_of(i)))
        .collect::<Result<_>>()?;
    let a_bar = BoolGrid { values: seeds.iter().map(|s| !s.0).collect(), ..proto.clone() };
    let b_bar = BoolGrid { values: seeds.iter().map(|s| !s.1).collect(), ..proto };
    GoodnessField::from_seeds(a_bar, b_bar, ladder, top)
}

pub fn goodness_field(config: &Config, ladder: &ScaleLadder, params: &EventParams) -> Result<GoodnessField> {
    goodness_field_to(config, ladder, params, ladder.kmax())
}

//! Path constructions: descent through the renormalized lattices, gluing of a
//! level-0 path into a site path, and the end-to-end short-path pipeline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{label_components, restrict_s_r, Bfs, BoxComponents, NO_COMPONENT};
use crate::error::{Error, Result};
use crate::events::{goodness_field_to, BoolGrid, EventParams, GoodnessField, SeedContext};
use crate::lattice::{l1_distance, BitField, Config, Point, Window};
use crate::renorm::ladder::{select_top_scale, ScaleLadder};

/// Path in the level-`k` lattice `L_k Z^d`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticePath {
    pub level: usize,
    pub spacing: u64,
    pub vertices: Vec<Point>,
    /// Consecutive vertices are one lattice step apart.
    pub nearest_neighbor: bool,
}

impl LatticePath {
    pub fn new(level: usize, spacing: u64, vertices: Vec<Point>) -> Result<Self> {
        if spacing == 0 {
            return Err(Error::InvalidParameter("lattice spacing must be positive".into()));
        }
        let d = vertices.first().ok_or(Error::EmptySet("lattice path"))?.dim();
        for v in &vertices {
            if v.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: v.dim() });
            }
            if v.coords().iter().any(|c| c.rem_euclid(spacing as i64) != 0) {
                return Err(Error::InvalidParameter(format!("{v} is not a vertex of the lattice of spacing {spacing}")));
            }
        }
        let nearest_neighbor = vertices.windows(2).all(|w| l1_distance(&w[0], &w[1]) == spacing);
        Ok(LatticePath { level, spacing, vertices, nearest_neighbor })
    }

    /// Monotone path from `from` to `to`, correcting the lowest axis first.
    pub fn straight(level: usize, spacing: u64, from: &Point, to: &Point) -> Result<Self> {
        let s = spacing as i64;
        let mut cur = from.coords().to_vec();
        let mut vertices = vec![from.clone()];
        for a in 0..cur.len() {
            while cur[a] != to[a] {
                cur[a] += s * (to[a] - cur[a]).signum();
                vertices.push(Point::new(cur.clone()));
            }
        }
        Self::new(level, spacing, vertices)
    }

    /// Number of lattice steps.
    pub fn steps(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn first(&self) -> &Point {
        &self.vertices[0]
    }

    pub fn last(&self) -> &Point {
        self.vertices.last().expect("paths are nonempty")
    }
}

fn odometer(j: &mut [i64], l: i64) -> bool {
    for a in (0..j.len()).rev() {
        j[a] += 1;
        if j[a] < l {
            return true;
        }
        j[a] = 0;
    }
    false
}

/// A level-`k` block with the anchors (in level-`(k-1)` steps from the block
/// corner) of the closed boxes `a + [0, r]^d` holding its bad sites.
struct Block {
    x: Vec<i64>,
    boxes: Vec<Vec<i64>>,
}

impl Block {
    fn blocks_plane(&self, axis: usize, j: i64, r: i64) -> bool {
        self.boxes.iter().any(|a| a[axis] <= j && j <= a[axis] + r)
    }

    fn contains(&self, off: &[i64], r: i64) -> bool {
        self.boxes.iter().any(|a| a.iter().zip(off).all(|(&lo, &c)| lo <= c && c <= lo + r))
    }

    /// Whether the line along `alpha` through offset `kk` on `beta` (all other
    /// offsets zero) meets a bad box.
    fn blocks_line(&self, alpha: usize, beta: usize, kk: i64, r: i64) -> bool {
        self.boxes.iter().any(|a| {
            a[beta] <= kk && kk <= a[beta] + r && (0..a.len()).all(|c| c == alpha || c == beta || a[c] == 0)
        })
    }
}

/// Coordinatewise minimum of the true sites of `grid` in `x + [0, l L)^d`.
fn bad_anchor(grid: &BoolGrid, x: &[i64], l: i64, r: i64) -> Result<Option<Vec<i64>>> {
    let d = x.len();
    let s = grid.spacing as i64;
    let mut lo = vec![i64::MAX; d];
    let mut hi = vec![i64::MIN; d];
    let mut j = vec![0i64; d];
    let mut c = vec![0i64; d];
    loop {
        for a in 0..d {
            c[a] = x[a] + j[a] * s;
        }
        match grid.get(&c) {
            None => {
                return Err(Error::OutsideWindow(format!("{} is outside the goodness field", Point::new(c))));
            }
            Some(true) => {
                for a in 0..d {
                    lo[a] = lo[a].min(j[a]);
                    hi[a] = hi[a].max(j[a]);
                }
            }
            Some(false) => {}
        }
        if !odometer(&mut j, l) {
            break;
        }
    }
    if lo[0] == i64::MAX {
        return Ok(None);
    }
    if (0..d).any(|a| hi[a] - lo[a] > r) {
        return Err(Error::Precondition(format!(
            "bad sites in the block at {} spread beyond r = {r} steps",
            Point::new(x.to_vec())
        )));
    }
    Ok(Some(lo))
}

#[derive(Clone, Copy)]
struct Step {
    beta: usize,
    sign: i64,
    alpha: usize,
    j: i64,
}

/// Refines a path of `k`-good vertices into a path of `(k-1)`-good vertices
/// starting in the first block and ending in the last.
///
/// Each block carries at most two bad boxes. Consecutive blocks are joined by
/// a straight segment on the hyperplane `alpha = j` avoiding all four boxes,
/// and consecutive segments are joined inside a block by a corner route or a
/// detour along a line avoiding the block's boxes. Offsets are the smallest
/// admissible ones.
pub fn descend_path(pi: &LatticePath, field: &GoodnessField, ladder: &ScaleLadder) -> Result<LatticePath> {
    let k = pi.level;
    if k == 0 || k > field.top() || k > ladder.kmax() {
        return Err(Error::Precondition(format!("cannot descend from level {k}")));
    }
    if pi.spacing != ladder.big_l[k] || !pi.nearest_neighbor {
        return Err(Error::Precondition(format!("input is not a nearest-neighbor path of spacing L_{k}")));
    }
    let d = pi.first().dim();
    if d < 2 {
        return Err(Error::Precondition("path descent needs d >= 2".into()));
    }
    let lower = field.level(k - 1);
    let (l, r, step) = (ladder.l[k - 1] as i64, ladder.r[k - 1] as i64, ladder.big_l[k - 1] as i64);
    let blocks = pi
        .vertices
        .iter()
        .map(|v| {
            if field.is_good(k, v.coords()) != Some(true) {
                return Err(Error::Precondition(format!("{v} is not {k}-good")));
            }
            let mut boxes = Vec::with_capacity(2);
            for grid in [&lower.a_bar, &lower.b_bar] {
                boxes.extend(bad_anchor(grid, v.coords(), l, r)?);
            }
            Ok(Block { x: v.coords().to_vec(), boxes })
        })
        .collect::<Result<Vec<_>>>()?;

    if blocks.len() == 1 {
        let b = &blocks[0];
        let mut j = vec![0i64; d];
        loop {
            if !b.contains(&j, r) {
                let v = (0..d).map(|a| b.x[a] + j[a] * step).collect();
                return LatticePath::new(k - 1, step as u64, vec![Point::new(v)]);
            }
            if !odometer(&mut j, l) {
                return Err(Error::Construction(format!("no good vertex in the block at {}", pi.first())));
            }
        }
    }

    let mut steps = Vec::with_capacity(blocks.len() - 1);
    for i in 0..blocks.len() - 1 {
        let beta = (0..d).find(|&a| blocks[i + 1].x[a] != blocks[i].x[a]).expect("distinct neighbors");
        let sign = (blocks[i + 1].x[beta] - blocks[i].x[beta]).signum();
        let alpha = (0..d).find(|&a| a != beta).expect("d >= 2");
        let j = (0..l)
            .find(|&j| !blocks[i].blocks_plane(alpha, j, r) && !blocks[i + 1].blocks_plane(alpha, j, r))
            .ok_or_else(|| {
                Error::Construction(format!(
                    "no admissible hyperplane between {} and {} (needs l > 4(r + 1) = {})",
                    pi.vertices[i],
                    pi.vertices[i + 1],
                    4 * (r + 1)
                ))
            })?;
        steps.push(Step { beta, sign, alpha, j });
    }

    let mut cur = blocks[0].x.clone();
    cur[steps[0].alpha] += steps[0].j * step;
    let mut out = vec![Point::new(cur.clone())];
    let mut walk = |axis: usize, dir: i64, n: i64, out: &mut Vec<Point>| {
        for _ in 0..n {
            cur[axis] += dir * step;
            out.push(Point::new(cur.clone()));
        }
    };
    for (i, st) in steps.iter().enumerate() {
        if i > 0 {
            let prev = steps[i - 1];
            if st.alpha != prev.alpha {
                walk(st.alpha, 1, st.j, &mut out);
                walk(prev.alpha, -1, prev.j, &mut out);
            } else {
                let beta = prev.beta;
                let kk = (0..l).find(|&kk| !blocks[i].blocks_line(st.alpha, beta, kk, r)).ok_or_else(|| {
                    Error::Construction(format!("no admissible detour line in the block at {}", pi.vertices[i]))
                })?;
                walk(beta, 1, kk, &mut out);
                walk(st.alpha, (st.j - prev.j).signum(), (st.j - prev.j).abs(), &mut out);
                walk(beta, -1, kk, &mut out);
            }
        }
        walk(st.beta, st.sign, l, &mut out);
    }
    LatticePath::new(k - 1, step as u64, out)
}

#[inline]
fn in_cube(w: &Window, g: usize, lo: &[i64], side: i64) -> bool {
    (0..w.dim()).all(|a| {
        let c = w.anchor()[a] + w.offset_along(g, a) as i64;
        c >= lo[a] && c < lo[a] + side
    })
}

/// The unique component of `S_{L0}` in `z + [0, L0)^d` with at least
/// `3/4 eta_hat L0^d` sites, as sorted window indices.
pub fn large_component(ctx: &SeedContext, z: &[i64]) -> Result<Vec<usize>> {
    let w = ctx.config().window();
    let p = ctx.params();
    let bc = BoxComponents::cube(w, z, p.big_l0 as usize, |g| ctx.s_l0().get(g))?;
    let min = p.min_component(w.dim());
    let large: Vec<usize> = (0..bc.sizes.len()).filter(|&c| bc.sizes[c] as u64 >= min).collect();
    if large.len() != 1 {
        return Err(Error::Construction(format!(
            "{} large components in the box at {} where exactly one is required",
            large.len(),
            Point::new(z.to_vec())
        )));
    }
    let c = large[0] as u32;
    let mut sites: Vec<usize> = (0..bc.labels.len())
        .filter(|&i| bc.labels[i] == c)
        .map(|i| bc.global[i].expect("occupied sites lie in the window"))
        .collect();
    sites.sort_unstable();
    Ok(sites)
}

/// Site path through the large components of a path of 0-good vertices.
pub fn glue_level0(pi0: &LatticePath, config: &Config, params: &EventParams) -> Result<Vec<usize>> {
    let ctx = SeedContext::new(config, *params)?;
    let mut bfs = Bfs::for_config(config);
    glue_level0_with(pi0, &ctx, None, &mut bfs)
}

/// Like [`glue_level0`], starting at `start` (default: the smallest window
/// index of the first component). Each leg is a BFS geodesic inside the
/// union of the two `2 L0` boxes to the nearest site of the next component.
pub fn glue_level0_with(pi0: &LatticePath, ctx: &SeedContext, start: Option<usize>, bfs: &mut Bfs) -> Result<Vec<usize>> {
    let l0 = ctx.params().big_l0;
    if pi0.level != 0 || pi0.spacing != l0 || !pi0.nearest_neighbor {
        return Err(Error::Precondition("input is not a nearest-neighbor path of spacing L0".into()));
    }
    let config = ctx.config();
    let w = config.window();
    let first = large_component(ctx, pi0.first().coords())?;
    let start = match start {
        Some(s) if first.binary_search(&s).is_err() => {
            return Err(Error::Precondition("start site is not in the first large component".into()));
        }
        Some(s) => s,
        None => first[0],
    };
    let side = 2 * l0 as i64;
    let mut path = vec![start];
    for pair in pi0.vertices.windows(2) {
        let (z, z2) = (pair[0].coords(), pair[1].coords());
        let next = large_component(ctx, z2)?;
        let cur = *path.last().expect("nonempty");
        let hit = bfs
            .search(
                config,
                &[cur],
                u32::MAX,
                |g| in_cube(w, g, z, side) || in_cube(w, g, z2, side),
                |g| next.binary_search(&g).is_ok(),
            )
            .ok_or_else(|| {
                Error::Construction(format!("large components at {} and {} are not joined locally", pair[0], pair[1]))
            })?;
        path.extend_from_slice(&bfs.path_to(hit).expect("reached")[1..]);
    }
    Ok(path)
}

/// Exact nonnegative rational.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u128,
    pub den: u128,
}

impl Ratio {
    pub fn new(num: u128, den: u128) -> Self {
        fn gcd(a: u128, b: u128) -> u128 {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        let g = gcd(num, den).max(1);
        Ratio { num: num / g, den: den / g }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Which clauses of the good-block event hold, with the first failing block
/// (lexicographic order) for each.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HStatus {
    /// A top-level block that is not `s`-good.
    pub not_good: Option<Vec<i64>>,
    /// A top-level block whose `S_{L_s}` sites are not connected in
    /// `z + [-L_s, 3L_s)^d`.
    pub not_connected: Option<Vec<i64>>,
}

impl HStatus {
    pub fn holds(&self) -> bool {
        self.not_good.is_none() && self.not_connected.is_none()
    }

    /// Short description of the failure, if any.
    pub fn diagnostic(&self) -> Option<String> {
        let fmt = |z: &Vec<i64>| Point::new(z.clone()).to_string();
        match (&self.not_good, &self.not_connected) {
            (None, None) => None,
            (Some(a), None) => Some(format!("clause (a) fails at block {}", fmt(a))),
            (None, Some(b)) => Some(format!("clause (b) fails at block {}", fmt(b))),
            (Some(a), Some(b)) => Some(format!("clause (a) fails at block {}; clause (b) fails at block {}", fmt(a), fmt(b))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    #[serde(rename = "R")]
    pub r: u64,
    pub s: usize,
    /// Lattice path length at each level, indexed by level; empty when `x`
    /// and `y` share a top-level block.
    pub level_lengths: Vec<u64>,
    pub glue_length: Option<u64>,
    /// Lengths of the local connections from `x` and to `y`.
    pub connector_lengths: Option<(u64, u64)>,
    /// `prod_{k<s} (1 + 8 (r_k + 1) / l_k)`.
    pub product_bound: Ratio,
    /// Maximal length of one level-0 gluing leg.
    pub glue_step_bound: u128,
    /// Bound on the returned length for this pair.
    pub length_bound: u128,
    /// Bound valid for every pair in `S_R` within distance `R` of the origin.
    pub uniform_bound: u128,
    /// `uniform_bound / R`.
    pub c_over_r: f64,
    pub final_length: Option<u64>,
    pub h_status: HStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShortPath {
    /// Window indices from `x` to `y`; empty when the event fails.
    pub sites: Vec<usize>,
    pub certificate: Certificate,
}

fn top_vertices(r: u64, ls: i64, d: usize) -> Vec<Vec<i64>> {
    let q = (2 * r as i64) / ls;
    let mut j = vec![0i64; d];
    let mut out = Vec::new();
    loop {
        out.push(j.iter().map(|&c| (c - q) * ls).collect());
        if !odometer(&mut j, 2 * q + 1) {
            return out;
        }
    }
}

/// Smallest box window on which [`construct_short_path`] runs for radius `r`.
pub fn short_path_window(r: u64, ladder: &ScaleLadder, d: usize) -> Result<Window> {
    let s = select_top_scale(ladder, r, d)?;
    let ls = ladder.big_l[s] as i64;
    let zmax = (2 * r as i64) / ls * ls;
    Window::new_box(vec![-zmax - ls; d], vec![(2 * zmax + 4 * ls) as usize; d])
}

fn overflow(what: &str) -> Error {
    Error::Overflow(format!("certificate bound: {what}"))
}

fn pow_u128(b: u128, d: usize) -> Result<u128> {
    b.checked_pow(d as u32).ok_or_else(|| overflow("power"))
}

fn locally_connected(config: &Config, s_ls: &BitField, z: &[i64], ls: i64) -> Result<bool> {
    let w = config.window();
    let lo: Vec<i64> = z.iter().map(|c| c - ls).collect();
    let bc = BoxComponents::cube(w, &lo, 4 * ls as usize, |g| config.is_occupied(g))?;
    let mut label = NO_COMPONENT;
    let mut c = vec![0i64; z.len()];
    for (i, g) in bc.global.iter().enumerate() {
        let Some(g) = *g else { continue };
        if !s_ls.get(g) {
            continue;
        }
        bc.local.coords_into(i, &mut c);
        if (0..z.len()).any(|a| c[a] < z[a] || c[a] >= z[a] + 2 * ls) {
            continue;
        }
        if label == NO_COMPONENT {
            label = bc.labels[i];
        } else if bc.labels[i] != label {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Builds a path in the occupied set between `x, y` in `S_R` within
/// `l-infinity` distance `R` of the origin, following the renormalization
/// pipeline, and certifies its length.
///
/// When the good-block event fails the result carries no path and the
/// certificate names the failing clause and block.
pub fn construct_short_path(
    config: &Config,
    x: &Point,
    y: &Point,
    r: u64,
    ladder: &ScaleLadder,
    params: &EventParams,
) -> Result<ShortPath> {
    params.validate()?;
    let w = config.window();
    let d = w.dim();
    if w.is_torus() || d < 2 {
        return Err(Error::Precondition("short paths need a box window with d >= 2".into()));
    }
    if params.big_l0 != ladder.big_l[0] {
        return Err(Error::InvalidParameter(format!(
            "event L0 = {} differs from ladder L0 = {}",
            params.big_l0, ladder.big_l[0]
        )));
    }
    let s = select_top_scale(ladder, r, d)?;
    let need = short_path_window(r, ladder, d)?;
    if !w.covers_box(need.anchor(), need.sides()[0] as i64) {
        return Err(Error::Precondition(format!(
            "window must cover {} + [0, {})^d",
            Point::new(need.anchor().to_vec()),
            need.sides()[0]
        )));
    }
    let lab = label_components(config);
    let mut ends = [0usize; 2];
    for (e, p) in ends.iter_mut().zip([x, y]) {
        if p.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: p.dim() });
        }
        if p.linf_norm() > r {
            return Err(Error::Precondition(format!("{p} lies outside B(0, {r})")));
        }
        *e = w.index_of(p).ok_or_else(|| Error::OutsideWindow(p.to_string()))?;
        match lab.component_of(*e) {
            Some(c) if lab.diameter(c) >= r => {}
            _ => return Err(Error::Precondition(format!("{p} is not in a component of diameter >= {r}"))),
        }
    }
    let [xi, yi] = ends;

    let ls = ladder.big_l[s] as i64;
    let l0 = ladder.big_l[0] as u128;
    let conn_bound = pow_u128(4 * ls as u128, d)? - 1;
    let glue_step_bound = 3 * l0 * pow_u128(2 * l0, d - 1)? - 1;
    let (mut num, mut den, mut descent_factor) = (1u128, 1u128, 1u128);
    for k in 0..s {
        let f = (ladder.l[k] + 8 * (ladder.r[k] + 1)) as u128;
        num = num.checked_mul(f).ok_or_else(|| overflow("product"))?;
        den = den.checked_mul(ladder.l[k] as u128).ok_or_else(|| overflow("product"))?;
        descent_factor = num;
    }
    let product_bound = Ratio::new(num, den);
    let bound_for = |top_steps: u128| -> Result<u128> {
        top_steps
            .checked_mul(descent_factor)
            .and_then(|v| v.checked_mul(glue_step_bound))
            .and_then(|v| v.checked_add(2 * conn_bound))
            .ok_or_else(|| overflow("length"))
    };
    let max_top = d as u128 * (4 * r as u128 + 1).div_ceil(ls as u128);
    let uniform_bound = bound_for(max_top)?.max(conn_bound);
    let mut cert = Certificate {
        r,
        s,
        level_lengths: Vec::new(),
        glue_length: None,
        connector_lengths: None,
        product_bound,
        glue_step_bound,
        length_bound: uniform_bound,
        uniform_bound,
        c_over_r: uniform_bound as f64 / r as f64,
        final_length: None,
        h_status: HStatus::default(),
    };

    let tops = top_vertices(r, ls, d);
    let field = goodness_field_to(config, ladder, params, s)?;
    for z in &tops {
        match field.is_good(s, z) {
            Some(true) => {}
            Some(false) => {
                cert.h_status.not_good = Some(z.clone());
                break;
            }
            None => return Err(Error::OutsideWindow(format!("block {} outside the goodness field", Point::new(z.clone())))),
        }
    }
    let s_ls = restrict_s_r(config, &lab, ls as u64);
    let connected: Vec<bool> =
        tops.par_iter().map(|z| locally_connected(config, s_ls.occupancy(), z, ls)).collect::<Result<_>>()?;
    cert.h_status.not_connected = connected.iter().position(|&c| !c).map(|i| tops[i].clone());
    if !cert.h_status.holds() {
        return Ok(ShortPath { sites: Vec::new(), certificate: cert });
    }

    let mut bfs = Bfs::for_config(config);
    let side = 4 * ls;
    let lift = |c: &[i64]| -> Vec<i64> { c.iter().map(|v| v.div_euclid(ls) * ls - ls).collect() };
    let common = tops
        .iter()
        .find(|z| (0..d).all(|a| [x[a], y[a]].iter().all(|&c| c >= z[a] && c < z[a] + 2 * ls)));
    let sites = if let Some(z) = common {
        let lo: Vec<i64> = z.iter().map(|c| c - ls).collect();
        let hit = bfs
            .search(config, &[xi], u32::MAX, |g| in_cube(w, g, &lo, side), |g| g == yi)
            .ok_or_else(|| Error::Construction("x and y share a block but are not joined in it".into()))?;
        cert.length_bound = conn_bound;
        bfs.path_to(hit).expect("reached")
    } else {
        let block_of = |p: &Point| Point::new(p.coords().iter().map(|v| v.div_euclid(ls) * ls).collect());
        let mut path = LatticePath::straight(s, ls as u64, &block_of(x), &block_of(y))?;
        cert.level_lengths = vec![0; s + 1];
        cert.level_lengths[s] = path.steps() as u64;
        cert.length_bound = bound_for(path.steps() as u128)?;
        for k in (1..=s).rev() {
            path = descend_path(&path, &field, ladder)?;
            cert.level_lengths[k - 1] = path.steps() as u64;
        }
        let ctx = SeedContext::new(config, *params)?;
        let first = large_component(&ctx, path.first().coords())?;
        let lo_x = lift(x.coords());
        let hit = bfs
            .search(config, &[xi], u32::MAX, |g| in_cube(w, g, &lo_x, side), |g| first.binary_search(&g).is_ok())
            .ok_or_else(|| Error::Construction("x is not joined to the first large component".into()))?;
        let head = bfs.path_to(hit).expect("reached");
        let glued = glue_level0_with(&path, &ctx, Some(hit), &mut bfs)?;
        let end = *glued.last().expect("nonempty");
        let lo_y = lift(y.coords());
        let hit = bfs
            .search(config, &[end], u32::MAX, |g| in_cube(w, g, &lo_y, side), |g| g == yi)
            .ok_or_else(|| Error::Construction("the last large component is not joined to y".into()))?;
        let tail = bfs.path_to(hit).expect("reached");
        cert.glue_length = Some(glued.len() as u64 - 1);
        cert.connector_lengths = Some((head.len() as u64 - 1, tail.len() as u64 - 1));
        let mut sites = head;
        sites.extend_from_slice(&glued[1..]);
        sites.extend_from_slice(&tail[1..]);
        sites
    };
    let len = sites.len() as u64 - 1;
    cert.final_length = Some(len);
    if len as u128 > cert.length_bound {
        return Err(Error::Construction(format!("path length {len} exceeds its bound {}", cert.length_bound)));
    }
    Ok(ShortPath { sites, certificate: cert })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::chemical_distance;
    use crate::events::cascade_step;
    use crate::renorm::LadderParams;
    use crate::samplers::sample_bernoulli;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ladder(l0: u64, r0: u64, big_l0: u64, kmax: usize) -> ScaleLadder {
        ScaleLadder::build(LadderParams { l0, r0, big_l0, theta_sc: 1, kmax }).unwrap()
    }

    /// Level-1 field over a `blocks^d` grid of level-1 vertices, with random
    /// bad sets confined to boxes of side `r0` in each block.
    fn random_field(lad: &ScaleLadder, d: usize, blocks: usize, rng: &mut ChaCha8Rng) -> GoodnessField {
        let (l, r, big_l0) = (lad.l[0] as usize, lad.r[0] as usize, lad.big_l[0]);
        let ext = vec![blocks * l; d];
        let n: usize = ext.iter().product();
        let mut grids = Vec::new();
        for _ in 0..2 {
            let mut values = vec![false; n];
            for b in 0..blocks.pow(d as u32) {
                if rng.random_bool(0.3) {
                    continue;
                }
                let corner: Vec<usize> = (0..d).map(|a| (b / blocks.pow((d - 1 - a) as u32)) % blocks * l).collect();
                let anchor: Vec<usize> = (0..d).map(|_| rng.random_range(0..l - r)).collect();
                let fill = rng.random_range(0.05..1.0);
                for _ in 0..(r + 1).pow(d as u32) {
                    let mut idx = 0;
                    for a in 0..d {
                        idx = idx * ext[a] + corner[a] + anchor[a] + rng.random_range(0..=r);
                    }
                    if rng.random_bool(fill) {
                        values[idx] = true;
                    }
                }
            }
            grids.push(BoolGrid::new(big_l0, vec![0; d], ext.clone(), values).unwrap());
        }
        let a1 = cascade_step(&grids[0], lad, 1).unwrap();
        let b1 = cascade_step(&grids[1], lad, 1).unwrap();
        let lv = |k, a: BoolGrid, b: BoolGrid| {
            let good = BoolGrid { values: a.values.iter().zip(&b.values).map(|(x, y)| !x && !y).collect(), ..a.clone() };
            crate::events::GoodnessLevel { k, a_bar: a, b_bar: b, good }
        };
        let b0 = grids.pop().unwrap();
        let a0 = grids.pop().unwrap();
        GoodnessField { levels: vec![lv(0, a0, b0), lv(1, a1, b1)] }
    }

    fn random_walk(d: usize, blocks: usize, spacing: i64, m: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
        let mut cur: Vec<i64> = (0..d).map(|_| rng.random_range(0..blocks as i64)).collect();
        let mut out = vec![Point::new(cur.iter().map(|c| c * spacing).collect())];
        while out.len() <= m {
            let a = rng.random_range(0..d);
            let s = if rng.random_bool(0.5) { 1 } else { -1 };
            if (0..blocks as i64).contains(&(cur[a] + s)) {
                cur[a] += s;
                out.push(Point::new(cur.iter().map(|c| c * spacing).collect()));
            }
        }
        out
    }

    /// Checks a descended path against the field directly.
    fn verify_descent(pi: &[Point], out: &[Point], field: &GoodnessField, lad: &ScaleLadder, k: usize) -> Result<(), String> {
        let (lk, lk1) = (lad.big_l[k] as i64, lad.big_l[k - 1] as i64);
        for p in out {
            if field.levels[k - 1].good.get(p.coords()) != Some(true) {
                return Err(format!("{p} is not good"));
            }
        }
        for w in out.windows(2) {
            let dist: i64 = w[0].coords().iter().zip(w[1].coords()).map(|(a, b)| (a - b).abs()).sum();
            if dist != lk1 {
                return Err(format!("{} -> {} is not a step", w[0], w[1]));
            }
        }
        let inside = |p: &Point, x: &Point| p.coords().iter().zip(x.coords()).all(|(c, o)| *c >= *o && *c < o + lk);
        if !inside(&out[0], &pi[0]) || !inside(out.last().unwrap(), pi.last().unwrap()) {
            return Err("endpoints outside the end blocks".into());
        }
        let (l, r, m) = (lad.l[k - 1] as f64, lad.r[k - 1] as f64, (pi.len() - 1) as f64);
        let n = (out.len() - 1) as f64;
        if n > (1.0 + 8.0 * r / l) * l * m + 1e-9 {
            return Err(format!("length {n} above the bound"));
        }
        Ok(())
    }

    #[test]
    fn lattice_path_flags() {
        let p = |c: &[i64]| Point::new(c.to_vec());
        assert!(LatticePath::new(0, 2, vec![p(&[0, 0]), p(&[2, 0])]).unwrap().nearest_neighbor);
        assert!(!LatticePath::new(0, 2, vec![p(&[0, 0]), p(&[2, 2])]).unwrap().nearest_neighbor);
        assert!(LatticePath::new(0, 2, vec![p(&[1, 0])]).is_err());
        let s = LatticePath::straight(1, 3, &p(&[-3, 6]), &p(&[6, 0])).unwrap();
        assert_eq!(s.steps(), 5);
        assert!(s.nearest_neighbor);
    }

    #[test]
    fn all_good_descent_is_straight() {
        let lad = ladder(21, 4, 2, 1);
        let d = 2;
        let ext = vec![21 * 4; d];
        let n = ext.iter().product();
        let g = BoolGrid::new(2, vec![0; d], ext, vec![false; n]).unwrap();
        let field = GoodnessField::from_seeds(g.clone(), g, &lad, 1).unwrap();
        let pi = LatticePath::straight(1, 42, &Point::new(vec![0, 0]), &Point::new(vec![126, 84])).unwrap();
        let out = descend_path(&pi, &field, &lad).unwrap();
        assert_eq!(out.steps(), 21 * 5);
        verify_descent(&pi.vertices, &out.vertices, &field, &lad, 1).unwrap();
        let single = LatticePath::new(1, 42, vec![Point::new(vec![42, 42])]).unwrap();
        let one = descend_path(&single, &field, &lad).unwrap();
        assert_eq!(one.vertices, vec![Point::new(vec![42, 42])]);
    }

    #[test]
    fn randomized_descents_pass_the_checker() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (d, lad) in [(2, ladder(21, 4, 2, 1)), (3, ladder(13, 2, 2, 1))] {
            for _ in 0..60 {
                let field = random_field(&lad, d, 4, &mut rng);
                let m = rng.random_range(0..12);
                let pi = random_walk(d, 4, lad.big_l[1] as i64, m, &mut rng);
                let path = LatticePath::new(1, lad.big_l[1], pi.clone()).unwrap();
                let out = descend_path(&path, &field, &lad).unwrap();
                verify_descent(&pi, &out.vertices, &field, &lad, 1).unwrap();
            }
        }
    }

    #[test]
    fn tight_ladder_can_run_out_of_hyperplanes() {
        // l0 = 4 r0 + 1: three closed boxes of side r0 cover all 9 offsets.
        let lad = ladder(9, 2, 2, 1);
        let d = 2;
        let ext = vec![18, 9];
        let mut a = vec![false; 18 * 9];
        let mut b = vec![false; 18 * 9];
        a[0] = true;
        a[2 * 9 + 2] = true;
        b[3] = true;
        b[5] = true;
        a[9 * 9 + 6] = true;
        a[9 * 9 + 8] = true;
        let ga = BoolGrid::new(2, vec![0; d], ext.clone(), a).unwrap();
        let gb = BoolGrid::new(2, vec![0; d], ext, b).unwrap();
        let field = GoodnessField::from_seeds(ga, gb, &lad, 1).unwrap();
        let pi = LatticePath::straight(1, 18, &Point::new(vec![0, 0]), &Point::new(vec![18, 0])).unwrap();
        assert!(matches!(descend_path(&pi, &field, &lad), Err(Error::Construction(_))));
    }

    fn replay(config: &Config, sites: &[usize]) -> Result<(), String> {
        let w = config.window();
        for &s in sites {
            if !config.is_occupied(s) {
                return Err(format!("{} is vacant", w.point_of(s)));
            }
        }
        for p in sites.windows(2) {
            if l1_distance(&w.point_of(p[0]), &w.point_of(p[1])) != 1 {
                return Err("not a nearest-neighbor step".into());
            }
        }
        Ok(())
    }

    #[test]
    fn glue_on_full_lattice() {
        let w = Window::new_box(vec![0, 0], vec![40, 40]).unwrap();
        let config = Config::full(w);
        let params = EventParams { big_l0: 4, eta_hat: 1.0, u: 0.0 };
        let pi = LatticePath::straight(0, 4, &Point::new(vec![4, 4]), &Point::new(vec![16, 12])).unwrap();
        let sites = glue_level0(&pi, &config, &params).unwrap();
        replay(&config, &sites).unwrap();
        assert!(sites.len() - 1 <= 8 * pi.steps());
        let single = LatticePath::new(0, 4, vec![Point::new(vec![8, 8])]).unwrap();
        assert_eq!(glue_level0(&single, &config, &params).unwrap().len(), 1);
    }

    #[test]
    fn glue_on_good_corridors() {
        let lad = ladder(9, 2, 4, 0);
        let params = EventParams { big_l0: 4, eta_hat: 0.85, u: 0.0 };
        for seed in 0..6 {
            let w = Window::new_box(vec![0, 0], vec![60, 60]).unwrap();
            let config = sample_bernoulli(0.9, &w, seed);
            let field = goodness_field_to(&config, &lad, &params, 0).unwrap();
            let good = &field.levels[0].good;
            let Some(start) = (0..good.len()).find(|&i| good.values[i]) else { continue };
            // Walk greedily through good neighbors.
            let mut verts = vec![good.coords_of(start)];
            'grow: for _ in 0..12 {
                let cur = verts.last().unwrap().clone();
                for a in 0..2 {
                    let mut nx = cur.clone();
                    nx[a] += 4;
                    if good.get(&nx) == Some(true) && !verts.contains(&nx) {
                        verts.push(nx);
                        continue 'grow;
                    }
                }
                break;
            }
            let pi = LatticePath::new(0, 4, verts.into_iter().map(Point::new).collect()).unwrap();
            let sites = glue_level0(&pi, &config, &params).unwrap();
            replay(&config, &sites).unwrap();
            let ctx = SeedContext::new(&config, params).unwrap();
            assert!(large_component(&ctx, pi.first().coords()).unwrap().contains(&sites[0]));
            assert!(large_component(&ctx, pi.last().coords()).unwrap().contains(sites.last().unwrap()));
        }
    }

    #[test]
    fn full_lattice_short_path_with_descent() {
        let lad = ladder(5, 1, 2, 1);
        let params = EventParams { big_l0: 2, eta_hat: 1.0, u: 0.0 };
        let r = 100;
        let w = short_path_window(r, &lad, 2).unwrap();
        let config = Config::full(w.clone());
        let x = Point::new(vec![-97, 3]);
        let y = Point::new(vec![88, -60]);
        let out = construct_short_path(&config, &x, &y, r, &lad, &params).unwrap();
        let c = &out.certificate;
        assert_eq!(c.s, 1);
        assert!(c.h_status.holds());
        assert_eq!(c.level_lengths.len(), 2);
        replay(&config, &out.sites).unwrap();
        assert_eq!(out.sites[0], w.index_of(&x).unwrap());
        assert_eq!(*out.sites.last().unwrap(), w.index_of(&y).unwrap());
        let len = out.sites.len() as u128 - 1;
        assert!(len >= l1_distance(&x, &y) as u128);
        assert!(len <= c.length_bound && c.length_bound <= c.uniform_bound);
        assert_eq!(c.product_bound, Ratio::new(21, 5));
    }

    #[test]
    fn same_block_pair_uses_local_connection() {
        let lad = ladder(9, 2, 10, 1);
        let params = EventParams { big_l0: 10, eta_hat: 1.0, u: 0.0 };
        let w = short_path_window(100, &lad, 2).unwrap();
        let config = Config::full(w);
        let out = construct_short_path(&config, &Point::new(vec![1, 1]), &Point::new(vec![5, 12]), 100, &lad, &params)
            .unwrap();
        assert_eq!(out.certificate.final_length, Some(15));
        assert!(out.certificate.level_lengths.is_empty());
    }

    #[test]
    fn vacant_slab_breaks_local_connection() {
        let lad = ladder(9, 2, 6, 0);
        let params = EventParams { big_l0: 6, eta_hat: 1.0, u: 0.0 };
        let r = 36;
        let w = short_path_window(r, &lad, 2).unwrap();
        let config = Config::from_fn(w.clone(), "slab", 0, |i| w.point_of(i)[0] != 20);
        let out =
            construct_short_path(&config, &Point::new(vec![-30, 0]), &Point::new(vec![0, 30]), r, &lad, &params).unwrap();
        assert!(out.sites.is_empty());
        assert_eq!(out.certificate.h_status.not_connected, Some(vec![12, -72]));
    }

    #[test]
    fn bernoulli_paths_dominate_bfs() {
        let r = 64;
        let lad = ladder(9, 2, 8, 1);
        let params = EventParams { big_l0: 8, eta_hat: 0.84, u: 0.0 };
        let w = short_path_window(r, &lad, 2).unwrap();
        let mut successes = 0;
        for seed in 0..8 {
            let config = sample_bernoulli(0.93, &w, seed);
            let lab = label_components(&config);
            let s_r = restrict_s_r(&config, &lab, r);
            let ball: Vec<Point> = s_r.occupancy().iter_ones().map(|i| w.point_of(i)).filter(|p| p.linf_norm() <= r).collect();
            let (x, y) = (ball[0].clone(), ball[ball.len() - 1].clone());
            let out = construct_short_path(&config, &x, &y, r, &lad, &params).unwrap();
            if out.certificate.h_status.holds() {
                successes += 1;
                replay(&config, &out.sites).unwrap();
                let bfs = chemical_distance(&config, &x, &y).unwrap().unwrap();
                assert!(bfs <= out.certificate.final_length.unwrap());
            }
        }
        assert!(successes > 0);
    }
}

//! Connected components, the diameter filtration `S_r`, chemical distance,
//! chemical balls, the norm-ordered labelling and the projection pseudometric.

use std::cmp::Ordering;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BitField, Config, Point, SignedProjections, Window};

/// Marker for vacant sites in per-site id arrays.
pub const NO_COMPONENT: u32 = u32::MAX;

/// Disjoint-set forest with path halving and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let p = self.parent[x] as usize;
            self.parent[x] = self.parent[p];
            x = p;
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a as u32;
        self.size[a] += self.size[b];
        true
    }
}

/// Component ids of the occupied sites of a configuration.
///
/// Ids are dense in `0..num_components` and assigned in order of each
/// component's smallest site index.
#[derive(Clone, Debug)]
pub struct ClusterLabeling {
    ids: Vec<u32>,
    sizes: Vec<usize>,
    diameters: Vec<u64>,
}

impl ClusterLabeling {
    pub fn num_components(&self) -> usize {
        self.sizes.len()
    }

    pub fn component_of(&self, idx: usize) -> Option<usize> {
        let c = self.ids[idx];
        (c != NO_COMPONENT).then_some(c as usize)
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn size(&self, c: usize) -> usize {
        self.sizes[c]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn diameter(&self, c: usize) -> u64 {
        self.diameters[c]
    }

    pub fn diameters(&self) -> &[u64] {
        &self.diameters
    }

    pub fn sites_of(&self, c: usize) -> Vec<usize> {
        let c = c as u32;
        (0..self.ids.len()).filter(|&i| self.ids[i] == c).collect()
    }

    /// Component with the most sites; ties go to the smaller id.
    pub fn largest_by_size(&self) -> Option<usize> {
        (0..self.sizes.len()).max_by(|&a, &b| self.sizes[a].cmp(&self.sizes[b]).then(b.cmp(&a)))
    }
}

/// Union-find labelling over nearest-neighbor adjacency, wrapping on a torus.
pub fn label_components(config: &Config) -> ClusterLabeling {
    let w = config.window();
    let n = w.len();
    let mut uf = UnionFind::new(n);
    for i in config.occupancy().iter_ones() {
        for axis in 0..w.dim() {
            if let Some(j) = w.neighbor(i, axis, true) {
                if config.is_occupied(j) {
                    uf.union(i, j);
                }
            }
        }
    }
    let mut ids = vec![NO_COMPONENT; n];
    let mut root_id = vec![NO_COMPONENT; n];
    let mut sizes = Vec::new();
    for i in config.occupancy().iter_ones() {
        let r = uf.find(i);
        if root_id[r] == NO_COMPONENT {
            root_id[r] = sizes.len() as u32;
            sizes.push(0);
        }
        ids[i] = root_id[r];
        sizes[root_id[r] as usize] += 1;
    }
    let diameters = if w.is_torus() {
        torus_diameters(config, &ids, sizes.len())
    } else {
        box_diameters(w, config.occupancy(), &ids, sizes.len())
    };
    ClusterLabeling { ids, sizes, diameters }
}

fn box_diameters(w: &Window, occ: &BitField, ids: &[u32], nc: usize) -> Vec<u64> {
    let mut proj = vec![SignedProjections::new(w.dim()); nc];
    let mut c = vec![0i64; w.dim()];
    for i in occ.iter_ones() {
        w.coords_into(i, &mut c);
        proj[ids[i] as usize].add(&c);
    }
    proj.iter().map(SignedProjections::diameter).collect()
}

/// On a torus, coordinates are unwrapped along a BFS tree of each component.
/// The projection diameter of the lift is capped by the sum over axes of the
/// per-axis lifted span, each span capped at `floor(N/2)`. Exact for
/// components that do not wind around the torus.
fn torus_diameters(config: &Config, ids: &[u32], nc: usize) -> Vec<u64> {
    let w = config.window();
    let d = w.dim();
    let n = w.len();
    let mut lifted = vec![0i64; n * d];
    let mut seen = BitField::zeros(n);
    let mut proj = vec![SignedProjections::new(d); nc];
    let mut lo = vec![i64::MAX; nc * d];
    let mut hi = vec![i64::MIN; nc * d];
    let mut queue = VecDeque::new();
    let mut c = vec![0i64; d];
    for start in config.occupancy().iter_ones() {
        if seen.get(start) {
            continue;
        }
        seen.set(start, true);
        w.coords_into(start, &mut c);
        lifted[start * d..start * d + d].copy_from_slice(&c);
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let comp = ids[i] as usize;
            proj[comp].add(&lifted[i * d..i * d + d]);
            for t in 0..d {
                lo[comp * d + t] = lo[comp * d + t].min(lifted[i * d + t]);
                hi[comp * d + t] = hi[comp * d + t].max(lifted[i * d + t]);
            }
            for axis in 0..d {
                for (forward, step) in [(false, -1i64), (true, 1)] {
                    if let Some(j) = w.neighbor(i, axis, forward) {
                        if config.is_occupied(j) && !seen.get(j) {
                            seen.set(j, true);
                            for t in 0..d {
                                lifted[j * d + t] = lifted[i * d + t];
                            }
                            lifted[j * d + axis] += step;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
    }
    let half = (w.sides()[0] / 2) as u64;
    (0..nc)
        .map(|comp| {
            let cap: u64 = (0..d).map(|t| hi[comp * d + t].abs_diff(lo[comp * d + t]).min(half)).sum();
            proj[comp].diameter().min(cap)
        })
        .collect()
}

/// Occupancy restricted to components of l1-diameter at least `r`.
pub fn restrict_s_r(config: &Config, labeling: &ClusterLabeling, r: u64) -> Config {
    let bits = BitField::from_fn(config.window().len(), |i| {
        labeling.component_of(i).is_some_and(|c| labeling.diameter(c) >= r)
    });
    config.with_occupancy(bits).expect("same window")
}

/// Finite-window stand-in for the infinite cluster.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyPolicy {
    /// Components whose l1-diameter reaches the smallest window side.
    DiameterSpan,
    /// The single component of largest diameter.
    Largest,
}

pub fn s_infty_proxy(config: &Config, labeling: &ClusterLabeling, policy: ProxyPolicy) -> Result<Config> {
    match policy {
        ProxyPolicy::DiameterSpan => {
            Ok(restrict_s_r(config, labeling, config.window().min_side() as u64))
        }
        ProxyPolicy::Largest => {
            let nc = labeling.num_components();
            if nc == 0 {
                return Err(Error::EmptySet("largest-component proxy of an empty configuration"));
            }
            let w = config.window();
            // Smallest-label site of each component.
            let mut min_site: Vec<Option<Point>> = vec![None; nc];
            for i in config.occupancy().iter_ones() {
                let c = labeling.ids[i] as usize;
                let p = w.point_of(i);
                if min_site[c].as_ref().is_none_or(|q| Labelling::compare(&p, q) == Ordering::Less) {
                    min_site[c] = Some(p);
                }
            }
            let best = (0..nc)
                .min_by(|&a, &b| {
                    labeling.diameters[b]
                        .cmp(&labeling.diameters[a])
                        .then(labeling.sizes[b].cmp(&labeling.sizes[a]))
                        .then_with(|| {
                            Labelling::compare(min_site[a].as_ref().unwrap(), min_site[b].as_ref().unwrap())
                        })
                })
                .expect("nc > 0") as u32;
            let bits = BitField::from_fn(w.len(), |i| labeling.ids[i] == best);
            config.with_occupancy(bits)
        }
    }
}

/// The labelling of `Z^d`: smaller l-infinity norm first, then lexicographic.
#[derive(Clone, Copy, Debug, Default)]
pub struct Labelling;

impl Labelling {
    pub fn compare(a: &Point, b: &Point) -> Ordering {
        Self::compare_coords(a.coords(), b.coords())
    }

    pub fn compare_coords(a: &[i64], b: &[i64]) -> Ordering {
        let na = a.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0);
        let nb = b.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0);
        na.cmp(&nb).then_with(|| a.cmp(b))
    }

    /// The label `l(x)`: the number of points strictly before `x`.
    pub fn label(x: &Point) -> Result<u128> {
        let d = x.dim() as u32;
        let m = x.linf_norm() as u128;
        let overflow = || Error::Overflow(format!("label of {x}"));
        let pow = |b: u128, e: u32| b.checked_pow(e).ok_or_else(overflow);
        let mut label = if m == 0 { 0 } else { pow(2 * m - 1, d)? };
        let side = 2 * m + 1;
        let mut prefix_on_shell = false;
        for (i, &xi) in x.coords().iter().enumerate() {
            let rest = d - 1 - i as u32;
            let full = pow(side, rest)?;
            let inner = if m == 0 { 0 } else { pow(2 * m - 1, rest)? };
            let lo = -(m as i64);
            for y in lo..xi {
                let hits = prefix_on_shell || y.unsigned_abs() as u128 == m;
                let count = if hits { full } else { full - inner };
                label = label.checked_add(count).ok_or_else(overflow)?;
            }
            prefix_on_shell |= xi.unsigned_abs() as u128 == m;
        }
        Ok(label)
    }
}

/// `Phi(x, V)`: the `y` in `V` minimising the label of `y - x`.
pub fn closest_in_set(x: &Point, set: &[Point]) -> Result<Point> {
    set.iter()
        .min_by(|a, b| Labelling::compare(&(*a - x), &(*b - x)))
        .cloned()
        .ok_or(Error::EmptySet("closest_in_set over an empty set"))
}

/// `Phi(x, V)` with `V` the occupied sites of `set`, by shell search around `x`.
///
/// `x` may lie outside the window. Offsets are taken in the window's metric,
/// so on a torus the minimal representative of `y - x` is used.
pub fn project_onto(set: &Config, x: &Point) -> Result<Point> {
    let w = set.window();
    if x.dim() != w.dim() {
        return Err(Error::DimensionMismatch { expected: w.dim(), got: x.dim() });
    }
    if set.occupied_count() == 0 {
        return Err(Error::EmptySet("projection onto an empty set"));
    }
    let d = w.dim();
    // Past this radius every window site has been examined.
    let reach = (0..d)
        .map(|i| {
            let lo = w.anchor()[i];
            let hi = lo + w.sides()[i] as i64 - 1;
            (x[i] - lo).unsigned_abs().max((hi - x[i]).unsigned_abs())
        })
        .max()
        .unwrap_or(0) as i64;
    let reach = if w.is_torus() { w.sides()[0] as i64 } else { reach };
    let mut off = vec![0i64; d];
    let mut y = vec![0i64; d];
    for m in 0..=reach {
        // Lexicographic sweep of [-m, m]^d, keeping only the shell |off| = m.
        off.iter_mut().for_each(|o| *o = -m);
        loop {
            if off.iter().any(|o| o.abs() == m) {
                for i in 0..d {
                    y[i] = x[i] + off[i];
                }
                if let Some(j) = w.index_of_coords(&y) {
                    if set.is_occupied(j) {
                        return Ok(Point::new(y));
                    }
                }
            }
            let mut done = true;
            for k in (0..d).rev() {
                if off[k] < m {
                    off[k] += 1;
                    off[k + 1..].iter_mut().for_each(|o| *o = -m);
                    done = false;
                    break;
                }
            }
            if done {
                break;
            }
        }
    }
    Err(Error::EmptySet("projection found no occupied site"))
}

const UNSEEN: u32 = u32::MAX;

/// Reusable breadth-first search over the occupied sites of a configuration.
///
/// Scratch arrays are sized to the window once and only the touched entries
/// are reset between queries.
#[derive(Clone, Debug)]
pub struct Bfs {
    dist: Vec<u32>,
    parent: Vec<u32>,
    visited: Vec<usize>,
}

impl Bfs {
    pub fn new(len: usize) -> Self {
        Bfs { dist: vec![UNSEEN; len], parent: vec![UNSEEN; len], visited: Vec::new() }
    }

    pub fn for_config(config: &Config) -> Self {
        Self::new(config.window().len())
    }

    fn reset(&mut self) {
        for &i in &self.visited {
            self.dist[i] = UNSEEN;
            self.parent[i] = UNSEEN;
        }
        self.visited.clear();
    }

    /// Runs BFS from `sources` through occupied sites accepted by `allowed`,
    /// up to depth `max_depth`. Returns the first site (in BFS order) for which
    /// `target` holds, stopping early; `None` explores the whole reachable set.
    pub fn search(
        &mut self,
        config: &Config,
        sources: &[usize],
        max_depth: u32,
        allowed: impl Fn(usize) -> bool,
        mut target: impl FnMut(usize) -> bool,
    ) -> Option<usize> {
        self.reset();
        let w = config.window();
        for &s in sources {
            if config.is_occupied(s) && allowed(s) && self.dist[s] == UNSEEN {
                self.dist[s] = 0;
                self.visited.push(s);
            }
        }
        let mut head = 0;
        while head < self.visited.len() {
            let i = self.visited[head];
            head += 1;
            if target(i) {
                return Some(i);
            }
            let di = self.dist[i];
            if di >= max_depth {
                continue;
            }
            let (dist, parent, visited) = (&mut self.dist, &mut self.parent, &mut self.visited);
            w.for_each_neighbor(i, |j| {
                if dist[j] == UNSEEN && config.is_occupied(j) && allowed(j) {
                    dist[j] = di + 1;
                    parent[j] = i as u32;
                    visited.push(j);
                }
            });
        }
        None
    }

    /// Full BFS from one site; returns the farthest site and its distance.
    pub fn sweep(&mut self, config: &Config, source: usize) -> (usize, u32) {
        self.search(config, &[source], u32::MAX, |_| true, |_| false);
        let far = *self.visited.last().unwrap_or(&source);
        (far, self.dist.get(far).copied().filter(|&d| d != UNSEEN).unwrap_or(0))
    }

    pub fn distance(&self, idx: usize) -> Option<u32> {
        let d = self.dist[idx];
        (d != UNSEEN).then_some(d)
    }

    /// Sites reached by the last search, in nondecreasing distance order.
    pub fn visited(&self) -> &[usize] {
        &self.visited
    }

    /// Site path from a source of the last search to `idx`, inclusive.
    pub fn path_to(&self, idx: usize) -> Option<Vec<usize>> {
        self.distance(idx)?;
        let mut path = vec![idx];
        let mut cur = idx;
        while self.parent[cur] != UNSEEN {
            cur = self.parent[cur] as usize;
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }
}

fn occupied_index(config: &Config, p: &Point) -> Result<usize> {
    let w = config.window();
    if p.dim() != w.dim() {
        return Err(Error::DimensionMismatch { expected: w.dim(), got: p.dim() });
    }
    let i = w.index_of(p).ok_or_else(|| Error::OutsideWindow(p.to_string()))?;
    if !config.is_occupied(i) {
        return Err(Error::Unoccupied(p.to_string()));
    }
    Ok(i)
}

/// Chemical distance inside the occupied set; `None` means infinite.
pub fn chemical_distance(config: &Config, x: &Point, y: &Point) -> Result<Option<u64>> {
    let mut bfs = Bfs::for_config(config);
    chemical_distance_with(&mut bfs, config, x, y)
}

pub fn chemical_distance_with(bfs: &mut Bfs, config: &Config, x: &Point, y: &Point) -> Result<Option<u64>> {
    let i = occupied_index(config, x)?;
    let j = occupied_index(config, y)?;
    Ok(bfs.search(config, &[i], u32::MAX, |_| true, |k| k == j).map(|k| bfs.dist[k] as u64))
}

/// Occupied sites within chemical distance `floor(r)` of `x`.
pub fn chemical_ball(config: &Config, x: &Point, r: f64) -> Result<Vec<Point>> {
    if !(r >= 0.0) {
        return Err(Error::InvalidParameter(format!("radius {r} must be nonnegative")));
    }
    let i = occupied_index(config, x)?;
    let depth = r.floor().min(u32::MAX as f64 - 1.0) as u32;
    let mut bfs = Bfs::for_config(config);
    bfs.search(config, &[i], depth, |_| true, |_| false);
    Ok(bfs.visited().iter().map(|&k| config.window().point_of(k)).collect())
}

/// `rho~(x, y)`: chemical distance in `config` between the projections of `x`
/// and `y` onto the occupied sites of `proxy`.
pub fn pseudo_distance(config: &Config, proxy: &Config, x: &Point, y: &Point) -> Result<Option<u64>> {
    let mut bfs = Bfs::for_config(config);
    pseudo_distance_with(&mut bfs, config, proxy, x, y)
}

pub fn pseudo_distance_with(
    bfs: &mut Bfs,
    config: &Config,
    proxy: &Config,
    x: &Point,
    y: &Point,
) -> Result<Option<u64>> {
    let px = project_onto(proxy, x)?;
    let py = project_onto(proxy, y)?;
    chemical_distance_with(bfs, config, &px, &py)
}

/// Components of the occupied sites inside the box `lo + [0, ext)`, with
/// sites outside the parent window treated as vacant.
#[derive(Clone, Debug)]
pub struct BoxComponents {
    /// Box window in absolute coordinates; local indices are its indices.
    pub local: Window,
    /// Parent-window index of every local site (`None` outside the window).
    pub global: Vec<Option<usize>>,
    /// Component id per local site, [`NO_COMPONENT`] when vacant.
    pub labels: Vec<u32>,
    pub sizes: Vec<usize>,
}

impl BoxComponents {
    pub fn new(window: &Window, lo: &[i64], ext: &[usize], occupied: impl Fn(usize) -> bool) -> Result<Self> {
        let local = Window::new_box(lo.to_vec(), ext.to_vec())?;
        let mut c = vec![0i64; lo.len()];
        let global: Vec<Option<usize>> = (0..local.len())
            .map(|i| {
                local.coords_into(i, &mut c);
                window.index_of_coords(&c)
            })
            .collect();
        let occ = BitField::from_fn(local.len(), |i| global[i].is_some_and(&occupied));
        let mut uf = UnionFind::new(local.len());
        for i in occ.iter_ones() {
            for axis in 0..local.dim() {
                if let Some(j) = local.neighbor(i, axis, true) {
                    if occ.get(j) {
                        uf.union(i, j);
                    }
                }
            }
        }
        let mut labels = vec![NO_COMPONENT; local.len()];
        let mut root_id = vec![NO_COMPONENT; local.len()];
        let mut sizes = Vec::new();
        for i in occ.iter_ones() {
            let r = uf.find(i);
            if root_id[r] == NO_COMPONENT {
                root_id[r] = sizes.len() as u32;
                sizes.push(0);
            }
            labels[i] = root_id[r];
            sizes[root_id[r] as usize] += 1;
        }
        Ok(BoxComponents { local, global, labels, sizes })
    }

    pub fn cube(window: &Window, lo: &[i64], side: usize, occupied: impl Fn(usize) -> bool) -> Result<Self> {
        Self::new(window, lo, &vec![side; lo.len()], occupied)
    }

    /// Component id of the site with absolute coordinates `c`, if occupied.
    pub fn label_at(&self, c: &[i64]) -> Option<u32> {
        let i = self.local.index_of_coords(c)?;
        let l = self.labels[i];
        (l != NO_COMPONENT).then_some(l)
    }

    /// Component id of the parent-window site `g`, if it lies in the box.
    pub fn label_of_global(&self, window: &Window, g: usize) -> Option<u32> {
        let p = window.point_of(g);
        self.label_at(p.coords())
    }
}

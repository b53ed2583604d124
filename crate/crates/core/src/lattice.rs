//! Finite windows of `Z^d`, lattice points, norms and occupancy configurations.
//!
//! Sites of a [`Window`] are indexed row-major over the coordinates in fixed
//! axis order: axis `d - 1` varies fastest. Serialized occupancy fields rely on
//! this order, so it must not change.

use std::fmt;
use std::io::{Read, Write};
use std::ops::{Add, Index, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A vertex of `Z^d`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<i64>);

impl Point {
    pub fn new(coords: Vec<i64>) -> Self {
        Point(coords)
    }

    pub fn origin(d: usize) -> Self {
        Point(vec![0; d])
    }

    /// The unit vector along `axis`, scaled by `scale`.
    pub fn axis(d: usize, axis: usize, scale: i64) -> Self {
        let mut c = vec![0; d];
        c[axis] = scale;
        Point(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn coords_mut(&mut self) -> &mut [i64] {
        &mut self.0
    }

    pub fn scaled(&self, k: i64) -> Point {
        Point(self.0.iter().map(|c| c * k).collect())
    }

    pub fn l1_norm(&self) -> u64 {
        l1_norm(self)
    }

    pub fn linf_norm(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }
}

impl Index<usize> for Point {
    type Output = i64;
    fn index(&self, i: usize) -> &i64 {
        &self.0[i]
    }
}

impl From<Vec<i64>> for Point {
    fn from(v: Vec<i64>) -> Self {
        Point(v)
    }
}

impl<const N: usize> From<[i64; N]> for Point {
    fn from(v: [i64; N]) -> Self {
        Point(v.to_vec())
    }
}

impl Add for &Point {
    type Output = Point;
    fn add(self, rhs: &Point) -> Point {
        debug_assert_eq!(self.dim(), rhs.dim());
        Point(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Point {
    type Output = Point;
    fn sub(self, rhs: &Point) -> Point {
        debug_assert_eq!(self.dim(), rhs.dim());
        Point(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// `|x|_1`, the sum of absolute coordinates.
pub fn l1_norm(p: &Point) -> u64 {
    p.0.iter().map(|c| c.unsigned_abs()).sum()
}

pub fn l1_distance(a: &Point, b: &Point) -> u64 {
    a.0.iter().zip(&b.0).map(|(x, y)| x.abs_diff(*y)).sum()
}

pub fn linf_distance(a: &Point, b: &Point) -> u64 {
    a.0.iter().zip(&b.0).map(|(x, y)| x.abs_diff(*y)).max().unwrap_or(0)
}

/// Exact l1-diameter of a finite point set.
///
/// Uses `max_eps (max eps.x - min eps.x)` over the `2^(d-1)` sign vectors with
/// `eps_0 = +1`, which is linear in the number of points.
pub fn l1_diameter(sites: &[Point]) -> Result<u64> {
    let first = sites.first().ok_or(Error::EmptySet("l1_diameter of an empty set"))?;
    let d = first.dim();
    let mut proj = SignedProjections::new(d);
    for p in sites {
        if p.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: p.dim() });
        }
        proj.add(p.coords());
    }
    Ok(proj.diameter())
}

/// Running extremes of the signed projections `eps . x`, used for l1-diameters.
#[derive(Clone, Debug)]
pub struct SignedProjections {
    d: usize,
    max: Vec<i64>,
    min: Vec<i64>,
}

impl SignedProjections {
    pub fn new(d: usize) -> Self {
        let n = 1usize << d.saturating_sub(1);
        SignedProjections { d, max: vec![i64::MIN; n], min: vec![i64::MAX; n] }
    }

    #[inline]
    pub fn add(&mut self, x: &[i64]) {
        for mask in 0..self.max.len() {
            let mut s = x[0];
            for (i, &c) in x.iter().enumerate().take(self.d).skip(1) {
                if mask >> (i - 1) & 1 == 1 {
                    s -= c;
                } else {
                    s += c;
                }
            }
            if s > self.max[mask] {
                self.max[mask] = s;
            }
            if s < self.min[mask] {
                self.min[mask] = s;
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.max.first().is_none_or(|&m| m == i64::MIN)
    }

    pub fn diameter(&self) -> u64 {
        if self.is_empty() {
            return 0;
        }
        self.max.iter().zip(&self.min).map(|(a, b)| a.abs_diff(*b)).max().unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Box,
    Torus,
}

/// A finite rectangular window of `Z^d`, either a box (no wrap) or a torus.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(try_from = "WindowRepr", into = "WindowRepr")]
pub struct Window {
    geometry: Geometry,
    anchor: Vec<i64>,
    sides: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct WindowRepr {
    geometry: Geometry,
    anchor: Vec<i64>,
    sides: Vec<usize>,
}

impl TryFrom<WindowRepr> for Window {
    type Error = Error;
    fn try_from(r: WindowRepr) -> Result<Self> {
        Window::new(r.geometry, r.anchor, r.sides)
    }
}

impl From<Window> for WindowRepr {
    fn from(w: Window) -> Self {
        WindowRepr { geometry: w.geometry, anchor: w.anchor, sides: w.sides }
    }
}

impl Window {
    pub fn new(geometry: Geometry, anchor: Vec<i64>, sides: Vec<usize>) -> Result<Self> {
        let d = sides.len();
        if d < 2 {
            return Err(Error::InvalidWindow(format!("dimension {d} < 2")));
        }
        if anchor.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: anchor.len() });
        }
        if sides.contains(&0) {
            return Err(Error::InvalidWindow("sides must be positive".into()));
        }
        if geometry == Geometry::Torus && sides.iter().any(|&s| s != sides[0]) {
            return Err(Error::InvalidWindow("torus requires equal sides".into()));
        }
        let mut strides = vec![1usize; d];
        let mut len: usize = 1;
        for i in (0..d).rev() {
            strides[i] = len;
            len = len
                .checked_mul(sides[i])
                .ok_or_else(|| Error::TooLarge("window site count overflows".into()))?;
        }
        Ok(Window { geometry, anchor, sides, strides, len })
    }

    pub fn new_box(anchor: Vec<i64>, sides: Vec<usize>) -> Result<Self> {
        Window::new(Geometry::Box, anchor, sides)
    }

    /// `B(0, r)` as a box window: anchor `-r`, side `2r + 1`.
    pub fn centered(d: usize, radius: usize) -> Result<Self> {
        Window::new_box(vec![-(radius as i64); d], vec![2 * radius + 1; d])
    }

    /// The torus `(Z / nZ)^d` with representatives `[0, n)^d`.
    pub fn torus(d: usize, n: usize) -> Result<Self> {
        Window::new(Geometry::Torus, vec![0; d], vec![n; d])
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn is_torus(&self) -> bool {
        self.geometry == Geometry::Torus
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn anchor(&self) -> &[i64] {
        &self.anchor
    }

    pub fn sides(&self) -> &[usize] {
        &self.sides
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn min_side(&self) -> usize {
        *self.sides.iter().min().expect("d >= 2")
    }

    /// Whether `p` is a site of a box window. Every point belongs to a torus.
    pub fn contains(&self, p: &Point) -> bool {
        if p.dim() != self.dim() {
            return false;
        }
        match self.geometry {
            Geometry::Torus => true,
            Geometry::Box => self.contains_coords(p.coords()),
        }
    }

    #[inline]
    pub fn contains_coords(&self, c: &[i64]) -> bool {
        c.iter()
            .zip(&self.anchor)
            .zip(&self.sides)
            .all(|((&x, &a), &s)| x >= a && x - a < s as i64)
    }

    /// Whether the whole box `lo + [0, extent)^d` lies inside a box window.
    pub fn covers_box(&self, lo: &[i64], extent: i64) -> bool {
        if self.is_torus() {
            return true;
        }
        lo.iter().zip(&self.anchor).zip(&self.sides).all(|((&l, &a), &s)| {
            l >= a && l + extent <= a + s as i64
        })
    }

    /// Flat index of `p`, wrapping on a torus; `None` outside a box window.
    pub fn index_of(&self, p: &Point) -> Option<usize> {
        if p.dim() != self.dim() {
            return None;
        }
        self.index_of_coords(p.coords())
    }

    #[inline]
    pub fn index_of_coords(&self, c: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for i in 0..self.dim() {
            let s = self.sides[i] as i64;
            let mut off = c[i] - self.anchor[i];
            match self.geometry {
                Geometry::Box => {
                    if off < 0 || off >= s {
                        return None;
                    }
                }
                Geometry::Torus => off = off.rem_euclid(s),
            }
            idx += off as usize * self.strides[i];
        }
        Some(idx)
    }

    pub fn point_of(&self, idx: usize) -> Point {
        let mut c = vec![0; self.dim()];
        self.coords_into(idx, &mut c);
        Point(c)
    }

    #[inline]
    pub fn coords_into(&self, idx: usize, out: &mut [i64]) {
        for i in 0..self.dim() {
            out[i] = self.anchor[i] + ((idx / self.strides[i]) % self.sides[i]) as i64;
        }
    }

    /// Offset of `idx` along `axis`, in `[0, side)`.
    #[inline]
    pub fn offset_along(&self, idx: usize, axis: usize) -> usize {
        (idx / self.strides[axis]) % self.sides[axis]
    }

    /// Neighbor of `idx` one step along `axis` (`forward` = +1), if any.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, forward: bool) -> Option<usize> {
        let s = self.sides[axis];
        let st = self.strides[axis];
        let off = (idx / st) % s;
        if forward {
            if off + 1 < s {
                Some(idx + st)
            } else if self.is_torus() && s > 1 {
                Some(idx + st - s * st)
            } else {
                None
            }
        } else if off > 0 {
            Some(idx - st)
        } else if self.is_torus() && s > 1 {
            Some(idx + (s - 1) * st)
        } else {
            None
        }
    }

    /// Calls `f` on every nearest neighbor of `idx` in the window.
    #[inline]
    pub fn for_each_neighbor(&self, idx: usize, mut f: impl FnMut(usize)) {
        for axis in 0..self.dim() {
            if let Some(j) = self.neighbor(idx, axis, false) {
                f(j);
            }
            if let Some(j) = self.neighbor(idx, axis, true) {
                // A side of 2 on a torus has both neighbors equal.
                if !(self.is_torus() && self.sides[axis] == 2) {
                    f(j);
                }
            }
        }
    }

    /// Per-axis displacement with torus wrap (minimal representative).
    fn axis_gap(&self, axis: usize, a: i64, b: i64) -> u64 {
        let g = a.abs_diff(b);
        match self.geometry {
            Geometry::Box => g,
            Geometry::Torus => {
                let n = self.sides[axis] as u64;
                let g = g % n;
                g.min(n - g)
            }
        }
    }

    pub fn l1_distance(&self, a: &Point, b: &Point) -> u64 {
        (0..self.dim()).map(|i| self.axis_gap(i, a[i], b[i])).sum()
    }

    pub fn linf_distance(&self, a: &Point, b: &Point) -> u64 {
        (0..self.dim()).map(|i| self.axis_gap(i, a[i], b[i])).max().unwrap_or(0)
    }

    /// Largest l1 distance between two sites of the window.
    pub fn l1_extent(&self) -> u64 {
        match self.geometry {
            Geometry::Box => self.sides.iter().map(|&s| s as u64 - 1).sum(),
            Geometry::Torus => self.sides.iter().map(|&s| s as u64 / 2).sum(),
        }
    }

    /// Indices of `B(center, r)` inside the window, in increasing index order.
    pub fn linf_ball_indices(&self, center: &Point, r: f64) -> Result<Vec<usize>> {
        if center.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: center.dim() });
        }
        if !self.contains(center) {
            return Err(Error::OutsideWindow(center.to_string()));
        }
        if !(r >= 0.0) {
            return Err(Error::InvalidParameter(format!("ball radius {r} must be nonnegative")));
        }
        let rr = r.floor() as i64;
        let d = self.dim();
        // Per-axis list of offsets (relative to the anchor) inside the ball.
        let mut per_axis: Vec<Vec<usize>> = Vec::with_capacity(d);
        for i in 0..d {
            let s = self.sides[i] as i64;
            let mut offs = Vec::new();
            match self.geometry {
                Geometry::Box => {
                    let c = center[i] - self.anchor[i];
                    for o in (c - rr).max(0)..=(c + rr).min(s - 1) {
                        offs.push(o as usize);
                    }
                }
                Geometry::Torus => {
                    let c = (center[i] - self.anchor[i]).rem_euclid(s);
                    if 2 * rr + 1 >= s {
                        offs.extend(0..s as usize);
                    } else {
                        for o in -rr..=rr {
                            offs.push((c + o).rem_euclid(s) as usize);
                        }
                        offs.sort_unstable();
                    }
                }
            }
            per_axis.push(offs);
        }
        let mut out = vec![0usize];
        for (i, offs) in per_axis.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * offs.len());
            for &base in &out {
                for &o in offs {
                    next.push(base + o * self.strides[i]);
                }
            }
            out = next;
        }
        Ok(out)
    }

    /// Sites of the window whose offset along every axis lies in the middle
    /// half `[side/4, side - side/4)`.
    pub fn central_half(&self) -> Vec<usize> {
        (0..self.len)
            .filter(|&idx| {
                (0..self.dim()).all(|i| {
                    let o = self.offset_along(idx, i);
                    let q = self.sides[i] / 4;
                    o >= q && o < self.sides[i] - q
                })
            })
            .collect()
    }
}

/// All window sites `y` with `|y - center|_inf <= floor(r)`, using the torus
/// metric when the window is a torus.
pub fn linf_ball(center: &Point, r: f64, window: &Window) -> Result<Vec<Point>> {
    Ok(window
        .linf_ball_indices(center, r)?
        .into_iter()
        .map(|i| window.point_of(i))
        .collect())
}

/// Dense bit field stored in little-endian 64-bit words.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct BitField {
    words: Vec<u64>,
    len: usize,
}

impl BitField {
    pub fn zeros(len: usize) -> Self {
        BitField { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn ones(len: usize) -> Self {
        let mut b = BitField { words: vec![u64::MAX; len.div_ceil(64)], len };
        b.clear_tail();
        b
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut b = BitField::zeros(len);
        for i in 0..len {
            if f(i) {
                b.set(i, true);
            }
        }
        b
    }

    fn clear_tail(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        debug_assert!(i < self.len);
        if v {
            self.words[i >> 6] |= 1 << (i & 63);
        } else {
            self.words[i >> 6] &= !(1 << (i & 63));
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + t)
            })
        })
    }

    pub fn not(&self) -> Self {
        let mut b = BitField { words: self.words.iter().map(|w| !w).collect(), len: self.len };
        b.clear_tail();
        b
    }

    pub fn is_subset_of(&self, other: &BitField) -> bool {
        self.len == other.len && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

const MAGIC: &[u8; 4] = b"PRC1";

/// An occupancy configuration `xi` on a finite window. Immutable once built.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Config {
    window: Window,
    occupancy: BitField,
    model_tag: String,
    seed: u64,
}

impl Config {
    pub fn new(window: Window, occupancy: BitField, model_tag: impl Into<String>, seed: u64) -> Result<Self> {
        if occupancy.len() != window.len() {
            return Err(Error::InvalidWindow(format!(
                "occupancy has {} bits, window has {} sites",
                occupancy.len(),
                window.len()
            )));
        }
        Ok(Config { window, occupancy, model_tag: model_tag.into(), seed })
    }

    pub fn from_fn(window: Window, model_tag: impl Into<String>, seed: u64, f: impl FnMut(usize) -> bool) -> Self {
        let occupancy = BitField::from_fn(window.len(), f);
        Config { window, occupancy, model_tag: model_tag.into(), seed }
    }

    pub fn full(window: Window) -> Self {
        let occupancy = BitField::ones(window.len());
        Config { window, occupancy, model_tag: "full".into(), seed: 0 }
    }

    pub fn empty(window: Window) -> Self {
        let occupancy = BitField::zeros(window.len());
        Config { window, occupancy, model_tag: "empty".into(), seed: 0 }
    }

    /// Occupied exactly at the listed points (points outside the window are ignored).
    pub fn from_points(window: Window, points: &[Point]) -> Self {
        let mut occupancy = BitField::zeros(window.len());
        for p in points {
            if let Some(i) = window.index_of(p) {
                occupancy.set(i, true);
            }
        }
        Config { window, occupancy, model_tag: "points".into(), seed: 0 }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn occupancy(&self) -> &BitField {
        &self.occupancy
    }

    pub fn model_tag(&self) -> &str {
        &self.model_tag
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn is_occupied(&self, idx: usize) -> bool {
        self.occupancy.get(idx)
    }

    pub fn is_occupied_at(&self, p: &Point) -> bool {
        self.window.index_of(p).is_some_and(|i| self.occupancy.get(i))
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.count_ones()
    }

    pub fn density(&self) -> f64 {
        self.occupied_count() as f64 / self.window.len() as f64
    }

    /// Same window and provenance, different occupancy.
    pub fn with_occupancy(&self, occupancy: BitField) -> Result<Self> {
        Config::new(self.window.clone(), occupancy, self.model_tag.clone(), self.seed)
    }

    pub fn complement(&self) -> Self {
        Config {
            window: self.window.clone(),
            occupancy: self.occupancy.not(),
            model_tag: self.model_tag.clone(),
            seed: self.seed,
        }
    }

    /// The configuration seen through `sub`: a box window whose sites take
    /// their occupancy from `self` (vacant where `self` has no such site).
    pub fn restrict_to(&self, sub: &Window) -> Result<Self> {
        if sub.dim() != self.window.dim() {
            return Err(Error::DimensionMismatch { expected: self.window.dim(), got: sub.dim() });
        }
        let mut c = vec![0i64; sub.dim()];
        let occupancy = BitField::from_fn(sub.len(), |i| {
            sub.coords_into(i, &mut c);
            self.window.index_of_coords(&c).is_some_and(|j| self.occupancy.get(j))
        });
        Config::new(sub.clone(), occupancy, self.model_tag.clone(), self.seed)
    }

    /// Writes the `PRC1` cache layout (all integers little-endian).
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let d = self.window.dim();
        w.write_all(MAGIC)?;
        w.write_all(&(d as u32).to_le_bytes())?;
        w.write_all(&[match self.window.geometry() {
            Geometry::Box => 0u8,
            Geometry::Torus => 1u8,
        }])?;
        for a in self.window.anchor() {
            w.write_all(&a.to_le_bytes())?;
        }
        for s in self.window.sides() {
            w.write_all(&(*s as u64).to_le_bytes())?;
        }
        let tag = self.model_tag.as_bytes();
        w.write_all(&(tag.len() as u32).to_le_bytes())?;
        w.write_all(tag)?;
        w.write_all(&self.seed.to_le_bytes())?;
        for word in self.occupancy.words() {
            w.write_all(&word.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
            let mut b = [0u8; N];
            r.read_exact(&mut b)?;
            Ok(b)
        }
        if &take::<4>(&mut r)? != MAGIC {
            return Err(Error::Format("bad magic, expected PRC1".into()));
        }
        let d = u32::from_le_bytes(take(&mut r)?) as usize;
        if !(2..=64).contains(&d) {
            return Err(Error::Format(format!("unsupported dimension {d}")));
        }
        let geometry = match take::<1>(&mut r)?[0] {
            0 => Geometry::Box,
            1 => Geometry::Torus,
            g => return Err(Error::Format(format!("unknown geometry byte {g}"))),
        };
        let mut anchor = Vec::with_capacity(d);
        for _ in 0..d {
            anchor.push(i64::from_le_bytes(take(&mut r)?));
        }
        let mut sides = Vec::with_capacity(d);
        for _ in 0..d {
            let s = u64::from_le_bytes(take(&mut r)?);
            sides.push(usize::try_from(s).map_err(|_| Error::Format("side too large".into()))?);
        }
        let window = Window::new(geometry, anchor, sides)?;
        let tag_len = u32::from_le_bytes(take(&mut r)?) as usize;
        let mut tag = vec![0u8; tag_len];
        r.read_exact(&mut tag)?;
        let model_tag = String::from_utf8(tag).map_err(|_| Error::Format("model tag is not utf-8".into()))?;
        let seed = u64::from_le_bytes(take(&mut r)?);
        let n_words = window.len().div_ceil(64);
        let mut words = Vec::with_capacity(n_words);
        for _ in 0..n_words {
            words.push(u64::from_le_bytes(take(&mut r)?));
        }
        let occupancy = BitField { words, len: window.len() };
        let mut check = occupancy.clone();
        check.clear_tail();
        if check != occupancy {
            return Err(Error::Format("nonzero padding bits".into()));
        }
        Config::new(window, occupancy, model_tag, seed)
    }
}

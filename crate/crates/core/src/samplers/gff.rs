//! Dirichlet Gaussian free field on a padded box.
//!
//! The Green function of simple random walk killed on leaving the box
//! `D = window + [-pad, pad]` is `g = (I - P)^{-1}`, with `P` the walk's
//! transition matrix restricted to `D`. It is diagonalised by the product sine
//! basis, so entries between window sites are evaluated exactly from the
//! spectral sum. The sum is contracted axis by axis, which keeps the cost
//! linear in the number of modes per window site.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BitField, Config, Point, Window};
use crate::rng::stream;

/// Default cap on the number of window sites in a Green matrix.
pub const DEFAULT_GREEN_CAP: usize = 20_000;

/// Covariance of the Dirichlet field between the sites of a window.
#[derive(Clone, Debug)]
pub struct GreenMatrix {
    window: Window,
    pad: usize,
    values: DMatrix<f64>,
}

impl GreenMatrix {
    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    pub fn sites(&self) -> Vec<Point> {
        (0..self.window.len()).map(|i| self.window.point_of(i)).collect()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Covariance between window sites `i` and `j` (window indices).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }
}

pub fn build_green_matrix(window: &Window, pad: usize) -> Result<GreenMatrix> {
    build_green_matrix_capped(window, pad, DEFAULT_GREEN_CAP)
}

pub fn build_green_matrix_capped(window: &Window, pad: usize, cap: usize) -> Result<GreenMatrix> {
    let d = window.dim();
    if d < 3 {
        return Err(Error::InvalidParameter(format!("Gaussian free field needs d >= 3, got {d}")));
    }
    if window.is_torus() {
        return Err(Error::InvalidParameter("Gaussian free field is sampled on box windows".into()));
    }
    if pad < 1 {
        return Err(Error::InvalidParameter("pad must be at least 1".into()));
    }
    let m = window.len();
    if m > cap {
        return Err(Error::TooLarge(format!(
            "{m} window sites exceed the Green matrix cap of {cap}; use a smaller window or raise the cap"
        )));
    }

    let outer: Vec<usize> = window.sides().iter().map(|s| s + 2 * pad).collect();
    // basis[a][x * n_a + k] = sqrt(2/(n+1)) sin(pi (k+1)(pad+x+1)/(n+1)) for window offset x.
    let basis: Vec<Vec<f64>> = (0..d)
        .map(|a| {
            let n = outer[a];
            let w = window.sides()[a];
            let norm = (2.0 / (n as f64 + 1.0)).sqrt();
            let mut b = vec![0.0; w * n];
            for x in 0..w {
                for k in 0..n {
                    let arg = std::f64::consts::PI * (k + 1) as f64 * (pad + x + 1) as f64 / (n as f64 + 1.0);
                    b[x * n + k] = norm * arg.sin();
                }
            }
            b
        })
        .collect();
    let cosines: Vec<Vec<f64>> = outer
        .iter()
        .map(|&n| (1..=n).map(|k| (std::f64::consts::PI * k as f64 / (n as f64 + 1.0)).cos()).collect())
        .collect();
    let n_modes: usize = outer.iter().product();
    let mut inv_gap = vec![0.0; n_modes];
    let mut kk = vec![0usize; d];
    for (mode, slot) in inv_gap.iter_mut().enumerate() {
        let mut r = mode;
        for a in (0..d).rev() {
            kk[a] = r % outer[a];
            r /= outer[a];
        }
        let lambda: f64 = (0..d).map(|a| cosines[a][kk[a]]).sum::<f64>() / d as f64;
        *slot = 1.0 / (1.0 - lambda);
    }

    let columns: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let y: Vec<usize> = (0..d).map(|a| window.offset_along(j, a)).collect();
            // Coefficients of g(., y) in the sine basis.
            let mut t = vec![0.0; n_modes];
            let mut kk = vec![0usize; d];
            for (mode, v) in t.iter_mut().enumerate() {
                let mut r = mode;
                let mut prod = inv_gap[mode];
                for a in (0..d).rev() {
                    kk[a] = r % outer[a];
                    r /= outer[a];
                    prod *= basis[a][y[a] * outer[a] + kk[a]];
                }
                *v = prod;
            }
            let mut dims = outer.clone();
            for a in (0..d).rev() {
                t = contract_axis(&t, &dims, a, &basis[a], window.sides()[a]);
                dims[a] = window.sides()[a];
            }
            t
        })
        .collect();

    let mut values = DMatrix::from_fn(m, m, |i, j| columns[j][i]);
    for i in 0..m {
        for j in i + 1..m {
            let v = 0.5 * (values[(i, j)] + values[(j, i)]);
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    Ok(GreenMatrix { window: window.clone(), pad, values })
}

/// `out[o, x, i] = sum_k basis[x, k] * t[o, k, i]` along axis `a`.
fn contract_axis(t: &[f64], dims: &[usize], a: usize, basis: &[f64], rows: usize) -> Vec<f64> {
    let n = dims[a];
    let outer: usize = dims[..a].iter().product();
    let inner: usize = dims[a + 1..].iter().product();
    let mut out = vec![0.0; outer * rows * inner];
    for o in 0..outer {
        for x in 0..rows {
            let brow = &basis[x * n..(x + 1) * n];
            let dst = &mut out[(o * rows + x) * inner..(o * rows + x + 1) * inner];
            for (k, &b) in brow.iter().enumerate() {
                let src = &t[(o * n + k) * inner..(o * n + k + 1) * inner];
                for (dv, sv) in dst.iter_mut().zip(src) {
                    *dv += b * sv;
                }
            }
        }
    }
    out
}

/// A real value per window site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealField {
    pub window: Window,
    pub values: Vec<f64>,
}

/// Occupied exactly where the field is at least `h`.
pub fn level_set(field: &RealField, h: f64) -> Config {
    let bits = BitField::from_fn(field.values.len(), |i| field.values[i] >= h);
    Config::new(field.window.clone(), bits, format!("gff_level(h={h})"), 0).expect("field matches its window")
}

/// Draws of the field via a Cholesky factor of the Green matrix.
#[derive(Clone, Debug)]
pub struct GffSampler {
    green: GreenMatrix,
    chol: DMatrix<f64>,
}

impl GffSampler {
    pub fn new(green: GreenMatrix) -> Result<Self> {
        let chol = nalgebra::Cholesky::new(green.values.clone())
            .ok_or_else(|| Error::Factorization("Green matrix is not numerically positive definite".into()))?
            .l();
        Ok(GffSampler { green, chol })
    }

    pub fn green(&self) -> &GreenMatrix {
        &self.green
    }

    pub fn sample(&self, seed: u64) -> RealField {
        let m = self.green.window.len();
        let mut rng = stream(seed, 0x6ff);
        let z = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        let phi = &self.chol * z;
        RealField { window: self.green.window.clone(), values: phi.as_slice().to_vec() }
    }
}

/// One draw of the Dirichlet field on `window` padded by `pad`.
pub fn sample_gff(window: &Window, pad: usize, seed: u64) -> Result<RealField> {
    Ok(GffSampler::new(build_green_matrix(window, pad)?)?.sample(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Green matrix by a dense LU solve of `(I - P) g = e_y` on the padded box.
    fn dense_green(window: &Window, pad: usize) -> DMatrix<f64> {
        let d = window.dim();
        let big = Window::new_box(
            window.anchor().iter().map(|a| a - pad as i64).collect(),
            window.sides().iter().map(|s| s + 2 * pad).collect(),
        )
        .unwrap();
        let n = big.len();
        let mut a = DMatrix::<f64>::identity(n, n);
        for i in 0..n {
            big.for_each_neighbor(i, |j| a[(i, j)] -= 1.0 / (2 * d) as f64);
        }
        let lu = a.lu();
        let m = window.len();
        let map: Vec<usize> = (0..m).map(|i| big.index_of(&window.point_of(i)).unwrap()).collect();
        let mut g = DMatrix::zeros(m, m);
        for (j, &bj) in map.iter().enumerate() {
            let mut e = DVector::zeros(n);
            e[bj] = 1.0;
            let col = lu.solve(&e).unwrap();
            for (i, &bi) in map.iter().enumerate() {
                g[(i, j)] = col[bi];
            }
        }
        g
    }

    /// `g(0) = int_0^inf e^{-t} I_0(t/3)^3 dt` for the full-space walk in d = 3.
    fn full_space_g0() -> f64 {
        // e^{-s} I_0(s) by its power series (moderate s) or asymptotic series.
        fn scaled_i0(s: f64) -> f64 {
            if s < 30.0 {
                let mut term = 1.0;
                let mut sum = 1.0;
                let q = s * s / 4.0;
                for k in 1..200 {
                    term *= q / (k * k) as f64;
                    sum += term;
                    if term < 1e-17 * sum {
                        break;
                    }
                }
                sum * (-s).exp()
            } else {
                let mut term = 1.0;
                let mut sum = 1.0;
                for k in 1..12 {
                    let kk = (2 * k - 1) as f64;
                    term *= kk * kk / (8.0 * s * k as f64);
                    sum += term;
                }
                sum / (2.0 * std::f64::consts::PI * s).sqrt()
            }
        }
        let f = |t: f64| scaled_i0(t / 3.0).powi(3);
        // Composite Simpson on [0, T] after t = v^2 (smooths the tail), then
        // the asymptotic tail (3/(2 pi))^{3/2} * 2 / sqrt(T) with its first correction.
        let t_max: f64 = 40_000.0;
        let v_max = t_max.sqrt();
        let steps = 200_000;
        let h = v_max / steps as f64;
        let g = |v: f64| 2.0 * v * f(v * v);
        let mut s = g(0.0) + g(v_max);
        for i in 1..steps {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
        }
        let body = s * h / 3.0;
        let c = (3.0 / (2.0 * std::f64::consts::PI)).powf(1.5);
        // (1 + 3/(8s))^3 with s = t/3 gives the 1/t^{5/2} correction 27/8.
        let tail = c * (2.0 / t_max.sqrt() + (27.0 / 8.0) * (2.0 / 3.0) / t_max.powf(1.5));
        body + tail
    }

    #[test]
    fn spectral_matches_dense_solve() {
        for (anchor, sides, pad) in [
            (vec![0, 0, 0], vec![3, 3, 3], 2),
            (vec![-1, 2, 0], vec![2, 3, 4], 3),
            (vec![0, 0, 0, 0], vec![2, 2, 2, 2], 1),
        ] {
            let w = Window::new_box(anchor, sides).unwrap();
            let g = build_green_matrix(&w, pad).unwrap();
            let oracle = dense_green(&w, pad);
            let err = (g.values() - &oracle).abs().max();
            assert!(err < 1e-10, "max error {err}");
        }
    }

    #[test]
    fn full_space_limit() {
        let g0 = full_space_g0();
        assert!((g0 - 1.516386).abs() < 1e-4, "oracle {g0}");
        let w = Window::new_box(vec![0, 0, 0], vec![1, 1, 1]).unwrap();
        let g = build_green_matrix(&w, 16).unwrap().get(0, 0);
        assert!((g - g0).abs() / g0 < 0.05, "g {g} vs {g0}");
    }

    #[test]
    fn symmetric_dominated_and_monotone_in_pad() {
        let w = Window::new_box(vec![0, 0, 0], vec![4, 4, 4]).unwrap();
        let g = build_green_matrix(&w, 3).unwrap();
        let g2 = build_green_matrix(&w, 4).unwrap();
        for i in 0..w.len() {
            assert!(g.get(i, i) <= g2.get(i, i));
            for j in 0..w.len() {
                assert_eq!(g.get(i, j), g.get(j, i));
                assert!(g.get(i, j) >= 0.0 && g.get(i, j) <= g.get(i, i) + 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let w2 = Window::new_box(vec![0, 0], vec![3, 3]).unwrap();
        assert!(build_green_matrix(&w2, 2).is_err());
        let w = Window::new_box(vec![0, 0, 0], vec![10, 10, 10]).unwrap();
        assert!(matches!(build_green_matrix_capped(&w, 2, 999), Err(Error::TooLarge(_))));
    }

    #[test]
    fn draws_are_centered_and_nested() {
        let w = Window::new_box(vec![-2, -2, -2], vec![5, 5, 5]).unwrap();
        let s = GffSampler::new(build_green_matrix(&w, 5).unwrap()).unwrap();
        let o = w.index_of(&Point::origin(3)).unwrap();
        let n = 4000;
        let mut sum = 0.0;
        let mut pos = 0;
        for seed in 0..n {
            let f = s.sample(seed);
            sum += f.values[o];
            pos += (f.values[o] >= 0.0) as usize;
            let hi = level_set(&f, 0.5);
            let lo = level_set(&f, -0.5);
            assert!(hi.occupancy().is_subset_of(lo.occupancy()));
        }
        let sd = s.green().get(o, o).sqrt();
        assert!((sum / n as f64).abs() < 4.0 * sd / (n as f64).sqrt());
        assert!((pos as f64 / n as f64 - 0.5).abs() < 0.03);
        let f = s.sample(1);
        assert_eq!(level_set(&f, f64::NEG_INFINITY).occupied_count(), w.len());
        assert_eq!(level_set(&f, 1e9).occupied_count(), 0);
    }
}

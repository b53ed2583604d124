//! Summary statistics with normal-approximation confidence intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Estimators refuse to summarize fewer effective trials than this.
pub const MIN_TRIALS: usize = 30;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
}

/// Pairwise (cascade) summation; the result does not depend on how the
/// values were produced, only on their order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

pub fn mean(v: &[f64]) -> f64 {
    pairwise_sum(v) / v.len() as f64
}

/// Unbiased sample variance (0 for fewer than two values).
pub fn variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    let sq: Vec<f64> = v.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (v.len() - 1) as f64
}

pub fn summarize(v: &[f64]) -> Result<Summary> {
    if v.len() < MIN_TRIALS {
        return Err(Error::InsufficientTrials { needed: MIN_TRIALS, got: v.len() });
    }
    Ok(summarize_unchecked(v))
}

/// Like [`summarize`] without the minimum-count guard; for per-trial
/// aggregates over sites or pairs.
pub fn summarize_unchecked(v: &[f64]) -> Summary {
    let n = v.len();
    let m = if n == 0 { f64::NAN } else { mean(v) };
    let sd = variance(v).sqrt();
    let se = if n == 0 { f64::NAN } else { sd / (n as f64).sqrt() };
    Summary { n, mean: m, std_dev: sd, stderr: se, ci95: (m - Z95 * se, m + Z95 * se) }
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(v: &[f64], q: f64) -> f64 {
    assert!(!v.is_empty() && (0.0..=1.0).contains(&q));
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let h = q * (s.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

pub fn median(v: &[f64]) -> f64 {
    quantile(v, 0.5)
}

/// Ordinary least squares fit `y = a + b x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    /// Standard error of the slope propagated from per-point errors of `y`.
    pub slope_stderr: f64,
    pub slope_ci95: (f64, f64),
}

/// Fits `y` on `x`; `y_err` are standard errors of the `y` values.
pub fn linear_fit(x: &[f64], y: &[f64], y_err: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n || y_err.len() != n {
        return Err(Error::InvalidParameter("linear fit needs at least two matched points".into()));
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("linear fit needs distinct abscissae".into()));
    }
    let slope = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx;
    let intercept = my - slope * mx;
    let var: f64 = x.iter().zip(y_err).map(|(a, e)| ((a - mx) / sxx).powi(2) * e * e).sum();
    let se = var.sqrt();
    Ok(LinearFit { intercept, slope, slope_stderr: se, slope_ci95: (slope - Z95 * se, slope + Z95 * se) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_known_sample() {
        let v: Vec<f64> = (1..=40).map(|i| i as f64).collect();
        let s = summarize(&v).unwrap();
        assert!((s.mean - 20.5).abs() < 1e-12);
        // Variance of 1..=n is n(n+1)/12.
        assert!((s.std_dev.powi(2) - 40.0 * 41.0 / 12.0).abs() < 1e-9);
        assert!(summarize(&v[..29]).is_err());
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| (i % 7) as f64).collect();
        assert_eq!(pairwise_sum(&v), v.iter().sum::<f64>());
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(median(&v), 2.5);
    }

    #[test]
    fn exact_line_is_recovered() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 1.0 - 2.0 * v).collect();
        let f = linear_fit(&x, &y, &[0.1; 4]).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        // Var(slope) = sigma^2 / Sxx with Sxx = 5.
        assert!((f.slope_stderr - (0.01f64 / 5.0).sqrt()).abs() < 1e-12);
    }
}

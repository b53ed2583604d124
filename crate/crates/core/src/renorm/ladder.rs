//! Scale ladders, sprinkling sequences and the deterministic induction check.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integers above this bound are rejected as overflow.
pub const LADDER_LIMIT: u64 = 1 << 62;

/// Parameters of a scale ladder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderParams {
    pub l0: u64,
    pub r0: u64,
    #[serde(rename = "L0")]
    pub big_l0: u64,
    pub theta_sc: u32,
    pub kmax: usize,
}

/// `l_k = l0 4^{k^theta}`, `r_k = r0 2^{k^theta}`, `L_{k+1} = l_k L_k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleLadder {
    pub params: LadderParams,
    pub l: Vec<u64>,
    pub r: Vec<u64>,
    #[serde(rename = "L")]
    pub big_l: Vec<u64>,
}

fn checked_pow2(e: u64) -> Option<u64> {
    (e < 62).then(|| 1u64 << e)
}

fn k_pow_theta(k: usize, theta: u32) -> Option<u64> {
    (k as u64).checked_pow(theta)
}

impl ScaleLadder {
    pub fn build(params: LadderParams) -> Result<Self> {
        let LadderParams { l0, r0, big_l0, theta_sc, kmax } = params;
        if r0 == 0 || l0 == 0 {
            return Err(Error::Ladder("l0 and r0 must be positive".into()));
        }
        if l0 <= 4 * r0 {
            return Err(Error::Ladder(format!("l0 = {l0} must exceed 4 r0 = {}", 4 * r0)));
        }
        if big_l0 < 2 {
            return Err(Error::Ladder(format!("L0 = {big_l0} must be at least 2")));
        }
        if theta_sc == 0 {
            return Err(Error::Ladder("theta_sc must be positive".into()));
        }
        let overflow = |what: &str, k: usize| Error::Overflow(format!("{what} at level {k} exceeds 2^62"));
        let mut l = Vec::with_capacity(kmax + 1);
        let mut r = Vec::with_capacity(kmax + 1);
        let mut big_l = Vec::with_capacity(kmax + 1);
        big_l.push(big_l0);
        for k in 0..=kmax {
            let e = k_pow_theta(k, theta_sc).ok_or_else(|| overflow("k^theta", k))?;
            let lk = e
                .checked_mul(2)
                .and_then(checked_pow2)
                .and_then(|f| f.checked_mul(l0))
                .filter(|&v| v <= LADDER_LIMIT)
                .ok_or_else(|| overflow("l_k", k))?;
            let rk = checked_pow2(e)
                .and_then(|f| f.checked_mul(r0))
                .filter(|&v| v <= LADDER_LIMIT)
                .ok_or_else(|| overflow("r_k", k))?;
            l.push(lk);
            r.push(rk);
            if k >= 1 {
                let prev = big_l[k - 1];
                let lk_big = l[k - 1]
                    .checked_mul(prev)
                    .filter(|&v| v <= LADDER_LIMIT)
                    .ok_or_else(|| overflow("L_k", k))?;
                big_l.push(lk_big);
            }
        }
        Ok(ScaleLadder { params, l, r, big_l })
    }

    pub fn kmax(&self) -> usize {
        self.params.kmax
    }

    /// `L_k^d`, if it fits in `u128`.
    pub fn volume(&self, k: usize, d: usize) -> Option<u128> {
        (self.big_l[k] as u128).checked_pow(d as u32)
    }
}

/// Largest `s <= kmax` with `L_s <= R^{1/d}`, tested exactly as `L_s^d <= R`.
pub fn select_top_scale(ladder: &ScaleLadder, r: u64, d: usize) -> Result<usize> {
    let fits = |k: usize| ladder.volume(k, d).is_some_and(|v| v <= r as u128);
    if !fits(0) {
        return Err(Error::Precondition(format!("R = {r} is below L0^d = {}^{d}", ladder.big_l[0])));
    }
    let s = (0..=ladder.kmax()).take_while(|&k| fits(k)).last().unwrap_or(0);
    if s == ladder.kmax() {
        let k = ladder.kmax();
        let next = (ladder.l[k] as u128).checked_mul(ladder.big_l[k] as u128).and_then(|v| v.checked_pow(d as u32));
        if next.is_some_and(|v| v <= r as u128) {
            return Err(Error::Ladder(format!("R = {r} reaches beyond level {k}; extend kmax")));
        }
    }
    Ok(s)
}

/// Form of the decorrelation error function `f_P`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum FpForm {
    /// `f_P(L) = c e^{(log L)^{eps_P}}` with `c >= 1`.
    StretchedExp { factor: f64 },
}

/// Form of the local-uniqueness error function `f_S`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum FsForm {
    /// `f_S(u, R) = c (log R)^{1 + Delta_S}` with `c >= 1`.
    PolyLog { factor: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularityProfile {
    pub eps_p: f64,
    pub chi_p: f64,
    pub f_p: FpForm,
    pub delta_s: f64,
    pub f_s: FsForm,
    pub r_p: f64,
    pub l_p: f64,
}

impl RegularityProfile {
    pub fn new(eps_p: f64, chi_p: f64, delta_s: f64) -> Self {
        RegularityProfile {
            eps_p,
            chi_p,
            f_p: FpForm::StretchedExp { factor: 1.0 },
            delta_s,
            f_s: FsForm::PolyLog { factor: 1.0 },
            r_p: 1.0,
            l_p: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("eps_p", self.eps_p), ("chi_p", self.chi_p), ("delta_s", self.delta_s)];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        let FpForm::StretchedExp { factor } = self.f_p;
        let FsForm::PolyLog { factor: fs } = self.f_s;
        if !(factor >= 1.0) || !(fs >= 1.0) {
            return Err(Error::InvalidParameter("f_P and f_S factors must be at least 1".into()));
        }
        Ok(())
    }

    /// `ceil(1 / eps_P)`, the smallest admissible ladder exponent.
    pub fn theta_sc(&self) -> u32 {
        (1.0 / self.eps_p).ceil().max(1.0) as u32
    }

    /// `ln f_P(L)` given `ln L`.
    pub fn ln_f_p(&self, ln_l: f64) -> f64 {
        let FpForm::StretchedExp { factor } = self.f_p;
        factor.ln() + ln_l.max(0.0).powf(self.eps_p)
    }

    pub fn f_p(&self, l: f64) -> f64 {
        self.ln_f_p(l.ln()).exp()
    }

    pub fn f_s(&self, r: f64) -> f64 {
        let FsForm::PolyLog { factor } = self.f_s;
        factor * r.ln().max(0.0).powf(1.0 + self.delta_s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SprinkleReport {
    pub u: f64,
    pub delta: f64,
    /// `u_0 >= u_1 >= ... >= u_kmax`.
    pub u_k: Vec<f64>,
    pub partial_product: f64,
    pub tail_bound: f64,
    /// Upper bound on the infinite product.
    pub product_bound: f64,
    pub passes: bool,
}

/// Number of exact factors before the geometric tail bound.
const SPRINKLE_TERMS: usize = 64;

/// `u_0 = (1 + delta) u`, `u_{k+1} = u_k / (1 + r_k^{-chi})`, with a check that
/// the infinite product of the factors stays below `1 + delta`.
pub fn sprinkle_ladder(u: f64, delta: f64, ladder: &ScaleLadder, profile: &RegularityProfile) -> Result<SprinkleReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta = {delta} must lie in (0, 1)")));
    }
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::InvalidParameter(format!("u = {u} must be positive")));
    }
    let chi = profile.chi_p;
    let LadderParams { r0, theta_sc, .. } = ladder.params;
    // r_k^{-chi} from logarithms, so k beyond the integer ladder is fine.
    let term = |k: usize| (-chi * ((r0 as f64).ln() + (k as f64).powi(theta_sc as i32) * std::f64::consts::LN_2)).exp();
    let mut u_k = vec![(1.0 + delta) * u];
    for k in 0..ladder.kmax() {
        let next = u_k[k] / (1.0 + term(k));
        u_k.push(next);
    }
    let partial_product: f64 = (0..SPRINKLE_TERMS).map(|k| 1.0 + term(k)).product();
    // k^theta >= k, so the remaining terms are dominated by r0^{-chi} 2^{-chi k}.
    let ratio = (-chi * std::f64::consts::LN_2).exp();
    let tail_sum = (r0 as f64).powf(-chi) * ratio.powi(SPRINKLE_TERMS as i32) / (1.0 - ratio);
    let tail_bound = tail_sum.exp();
    let product_bound = partial_product * tail_bound;
    Ok(SprinkleReport { u, delta, u_k, partial_product, tail_bound, product_bound, passes: product_bound <= 1.0 + delta })
}

/// Upper limit of the exact partial sum in `kappa_k`.
const KAPPA_TERMS: u64 = 1_000_000;

/// Bracket `[lo, hi]` of `kappa_k = 1 + l0 sum_{i > k} i^{-2}`.
pub fn kappa_bracket(l0: u64, k: usize) -> (f64, f64) {
    static TOTAL: OnceLock<f64> = OnceLock::new();
    // Summed from small terms upward to limit rounding.
    let total = *TOTAL.get_or_init(|| (1..=KAPPA_TERMS).rev().map(|i| 1.0 / (i as f64 * i as f64)).sum());
    let k = k as u64;
    let partial = if k >= KAPPA_TERMS {
        0.0
    } else {
        total - (1..=k).map(|i| 1.0 / (i as f64 * i as f64)).sum::<f64>()
    };
    let n = KAPPA_TERMS.max(k) as f64;
    let lo = partial + 1.0 / (n + 1.0);
    let hi = partial + 1.0 / n;
    (1.0 + l0 as f64 * lo, 1.0 + l0 as f64 * hi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs` at the worst bracket end; nonnegative on a pass.
    pub slack: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCheck {
    pub k: usize,
    pub kappa: (f64, f64),
    pub cond_a: ConditionCheck,
    pub cond_b: ConditionCheck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecursionReport {
    pub d: usize,
    pub levels: Vec<LevelCheck>,
    /// Whether the seed probability exponent reaches `kappa_0`.
    pub seed_check: Option<bool>,
    pub all_pass: bool,
}

impl RecursionReport {
    pub fn first_failure(&self) -> Option<usize> {
        self.levels.iter().find(|l| !(l.cond_a.pass && l.cond_b.pass)).map(|l| l.k)
    }
}

/// Checks both induction conditions at every level `0..=kmax`:
///
/// (a) `log2(l_k^{2d}) - kappa_k 2^{k+1} <= -kappa_{k+1} 2^{k+1} - 1`
/// (b) `log2(l_k^{2d}) - f_P(L_k) log2(e) <= -kappa_{k+1} 2^{k+1} - 1`
///
/// Everything is evaluated in log space, so levels whose integers overflow
/// are still checked. `p0_exponent`, if given, is compared against `kappa_0`.
pub fn verify_recursion_bound(
    params: &LadderParams,
    profile: &RegularityProfile,
    d: usize,
    p0_exponent: Option<f64>,
) -> RecursionReport {
    let LadderParams { l0, big_l0, theta_sc, kmax, .. } = *params;
    let log2e = std::f64::consts::LOG2_E;
    let mut ln_big_l = (big_l0 as f64).ln();
    let mut levels = Vec::with_capacity(kmax + 1);
    let mut kappa_k = kappa_bracket(l0, 0);
    let seed_check = p0_exponent.map(|e| e >= kappa_k.1);
    for k in 0..=kmax {
        let kappa_next = kappa_bracket(l0, k + 1);
        let kt = (k as f64).powi(theta_sc as i32);
        let log2_lk = (l0 as f64).log2() + 2.0 * kt;
        let base = 2.0 * d as f64 * log2_lk;
        let scale = 2f64.powi(k as i32 + 1);
        let check = |lhs_lo: f64, lhs_hi: f64, rhs_lo: f64, rhs_hi: f64| {
            let slack = (rhs_lo - lhs_lo).min(rhs_hi - lhs_hi);
            ConditionCheck { lhs: lhs_hi, rhs: rhs_hi, slack, pass: slack >= 0.0 }
        };
        let rhs = |kap: f64| -kap * scale - 1.0;
        let cond_a = check(
            base - kappa_k.0 * scale,
            base - kappa_k.1 * scale,
            rhs(kappa_next.0),
            rhs(kappa_next.1),
        );
        let ln_fp = profile.ln_f_p(ln_big_l);
        let fp_term = if ln_fp > 700.0 { f64::INFINITY } else { ln_fp.exp() * log2e };
        let lhs_b = base - fp_term;
        let cond_b = check(lhs_b, lhs_b, rhs(kappa_next.0), rhs(kappa_next.1));
        levels.push(LevelCheck { k, kappa: kappa_k, cond_a, cond_b });
        ln_big_l += log2_lk * std::f64::consts::LN_2;
        kappa_k = kappa_next;
    }
    let all_pass = levels.iter().all(|l| l.cond_a.pass && l.cond_b.pass) && seed_check.unwrap_or(true);
    RecursionReport { d, levels, seed_check, all_pass }
}

/// Smallest `L0` in `[2, max_l0]` for which condition (b) holds at every
/// level, found by bisection. Condition (b) is monotone in `L0` because every
/// `L_k` grows with it.
pub fn min_l0_for_condition_b(params: &LadderParams, profile: &RegularityProfile, d: usize, max_l0: u64) -> Option<u64> {
    let ok = |l: u64| {
        let p = LadderParams { big_l0: l, ..*params };
        verify_recursion_bound(&p, profile, d, None).levels.iter().all(|lv| lv.cond_b.pass)
    };
    if !ok(max_l0) {
        return None;
    }
    let (mut lo, mut hi) = (2u64, max_l0);
    if ok(lo) {
        return Some(lo);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

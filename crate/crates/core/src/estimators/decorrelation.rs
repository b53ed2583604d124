use serde::{Deserialize, Serialize};

use super::density::sampler;
use super::report::{run_trials, Observation, TrialRecord, TrialReport};
use super::stats::{mean, MIN_TRIALS, Z95};
use crate::cluster::{BoxComponents, NO_COMPONENT};
use crate::error::{Error, Result};
use crate::lattice::{Config, Point, Window};
use crate::renorm::RegularityProfile;
use crate::samplers::ModelSpec;

/// Local events supported on `x + [-L, L]^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalEvent {
    /// Occupied crossing between the two faces normal to the first axis.
    Crossing,
    /// The center site is occupied.
    CenterOccupied,
    /// Vacant crossing between the faces normal to the first axis.
    VacantCrossing,
    /// The center site is vacant.
    CenterVacant,
}

impl LocalEvent {
    pub fn is_increasing(self) -> bool {
        matches!(self, LocalEvent::Crossing | LocalEvent::CenterOccupied)
    }

    pub fn holds(self, config: &Config, x: &Point, l: u64) -> Result<bool> {
        let w = config.window();
        let idx = w.index_of(x).ok_or_else(|| Error::OutsideWindow(x.to_string()))?;
        match self {
            LocalEvent::CenterOccupied => Ok(config.is_occupied(idx)),
            LocalEvent::CenterVacant => Ok(!config.is_occupied(idx)),
            LocalEvent::Crossing | LocalEvent::VacantCrossing => {
                let want = self == LocalEvent::Crossing;
                let lo: Vec<i64> = x.coords().iter().map(|c| c - l as i64).collect();
                if !w.covers_box(&lo, 2 * l as i64 + 1) {
                    return Err(Error::InvalidWindow(format!("event box around {x} leaves the window")));
                }
                let bc = BoxComponents::cube(w, &lo, 2 * l as usize + 1, |i| config.is_occupied(i) == want)?;
                let side = 2 * l as usize;
                let mut touches = vec![0u8; bc.sizes.len()];
                for (i, &lab) in bc.labels.iter().enumerate() {
                    if lab == NO_COMPONENT {
                        continue;
                    }
                    match bc.local.offset_along(i, 0) {
                        0 => touches[lab as usize] |= 1,
                        o if o == side => touches[lab as usize] |= 2,
                        _ => {}
                    }
                }
                Ok(touches.contains(&3))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecorrelationParams {
    /// Parameter of the joint probability.
    pub u_hat: f64,
    /// Parameter of the marginals.
    pub u: f64,
    #[serde(rename = "L")]
    pub l: u64,
    #[serde(rename = "R")]
    pub r: u64,
    /// `|x1 - x2|_inf`, along the first axis; at least `R L`.
    pub separation: u64,
    pub events: (LocalEvent, LocalEvent),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecorrelationReport {
    pub lhs: f64,
    pub p1: f64,
    pub p2: f64,
    /// `e^{-f_P(L)}`.
    pub error_term: f64,
    pub rhs: f64,
    pub diff: f64,
    pub diff_stderr: f64,
    /// `lhs - p1 p2` without the error term.
    pub raw_diff: f64,
    /// Whether `diff <= Z95 * stderr`.
    pub holds: bool,
    /// Trials where the coupled samples or indicators were out of order.
    pub monotonicity_violations: usize,
    pub report: TrialReport,
}

/// Window holding both event boxes, `[-L, sep + L] x [-L, L]^{d-1}`.
pub fn decorrelation_window(d: usize, l: u64, separation: u64) -> Result<Window> {
    let l = l as i64;
    let mut sides = vec![2 * l as usize + 1; d];
    sides[0] = separation as usize + 2 * l as usize + 1;
    Window::new_box(vec![-l; d], sides)
}

/// Monte Carlo check of `P^{u_hat}[B1 ∩ B2] <= P^u[B1] P^u[B2] + e^{-f_P(L)}`
/// for increasing events, mirrored for decreasing ones. The parameters must
/// be ordered so the joint probability is taken on the smaller set for
/// increasing events and on the larger set for decreasing events.
pub fn check_decorrelation(
    spec: &ModelSpec,
    params: &DecorrelationParams,
    profile: &RegularityProfile,
    trials: usize,
    master_seed: u64,
) -> Result<DecorrelationReport> {
    let d = spec.d;
    let (e1, e2) = params.events;
    if e1.is_increasing() != e2.is_increasing() {
        return Err(Error::Precondition("both events must be increasing or both decreasing".into()));
    }
    if params.l == 0 || params.r == 0 {
        return Err(Error::InvalidParameter("L and R must be positive".into()));
    }
    let min_sep = params.r.checked_mul(params.l).ok_or_else(|| Error::Overflow("R L".into()))?;
    if params.separation < min_sep {
        return Err(Error::Precondition(format!(
            "supports are {} apart, need at least R L = {min_sep}",
            params.separation
        )));
    }
    // Joint probability on the smaller set for increasing events.
    let lhs_smaller = e1.is_increasing();
    let grows = spec.increasing_in_parameter();
    let lhs_is_smaller = if grows { params.u_hat <= params.u } else { params.u_hat >= params.u };
    if lhs_is_smaller != lhs_smaller && params.u_hat != params.u {
        return Err(Error::Precondition("u_hat and u are ordered the wrong way for these events".into()));
    }
    if trials < MIN_TRIALS {
        return Err(Error::InsufficientTrials { needed: MIN_TRIALS, got: trials });
    }
    let window = decorrelation_window(d, params.l, params.separation)?;
    let s = sampler(spec, &window, master_seed)?;
    let x1 = Point::origin(d);
    let x2 = Point::axis(d, 0, params.separation as i64);
    let records = run_trials(master_seed, trials, |t, seed| -> Result<TrialRecord> {
        let c = s.sample_coupled(&[params.u_hat, params.u], seed)?;
        let joint = e1.holds(&c[0], &x1, params.l)? && e2.holds(&c[0], &x2, params.l)?;
        let m1 = e1.holds(&c[1], &x1, params.l)?;
        let m2 = e2.holds(&c[1], &x2, params.l)?;
        let nested = if lhs_smaller {
            c[0].occupancy().is_subset_of(c[1].occupancy())
        } else {
            c[1].occupancy().is_subset_of(c[0].occupancy())
        };
        let joint_at_rhs = m1 && m2;
        let ordered = nested && (!joint || joint_at_rhs);
        let b = |v: bool| if v { 1.0 } else { 0.0 };
        Ok(TrialRecord {
            trial: t,
            seed,
            observations: vec![
                Observation::new("joint", b(joint)),
                Observation::new("marginal1", b(m1)),
                Observation::new("marginal2", b(m2)),
                Observation::new("ordered", b(ordered)),
            ],
            excluded: None,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut report = TrialReport::new(Some(spec.clone()), master_seed, records);
    report.summarize(&["joint", "marginal1", "marginal2"])?;
    let (j, i1, i2) = (report.values("joint"), report.values("marginal1"), report.values("marginal2"));
    let (lhs, p1, p2) = (mean(&j), mean(&i1), mean(&i2));
    // Influence function of lhs - p1 p2 by the delta method.
    let psi: Vec<f64> = (0..j.len()).map(|k| j[k] - p2 * i1[k] - p1 * i2[k]).collect();
    let diff_stderr = (super::stats::variance(&psi) / psi.len() as f64).sqrt();
    let error_term = (-profile.f_p(params.l as f64)).exp();
    let rhs = p1 * p2 + error_term;
    let monotonicity_violations = report.values("ordered").iter().filter(|&&v| v == 0.0).count();
    Ok(DecorrelationReport {
        lhs,
        p1,
        p2,
        error_term,
        rhs,
        diff: lhs - rhs,
        diff_stderr,
        raw_diff: lhs - p1 * p2,
        holds: lhs - rhs <= Z95 * diff_stderr,
        monotonicity_violations,
        report,
    })
}

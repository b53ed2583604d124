//! Seeded samplers for the model families.
//!
//! Every sampler is a pure function of `(spec, window, seed)`. Samples drawn
//! under one seed at different parameter values are monotonically coupled.

pub mod bernoulli;
pub mod gff;
pub mod interlacement;
pub mod torus;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BitField, Config, Window};

pub use bernoulli::sample_bernoulli;
pub use gff::{build_green_matrix, build_green_matrix_capped, level_set, sample_gff, GffSampler, GreenMatrix, RealField};
pub use interlacement::{estimate_capacity, sample_interlacement, sample_vacant_interlacement, InterlacementSampler};
pub use torus::sample_torus_vacant;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    Bernoulli { p: f64 },
    GffLevel { h: f64, pad: usize },
    Interlacement { u: f64, escape_radius: u64, capacity_trials: u64 },
    VacantInterlacement { u: f64, escape_radius: u64, capacity_trials: u64 },
    TorusVacant { u: f64, n: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub model: Family,
    pub d: usize,
    /// Parameter interval `(a, b)` for sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
}

impl ModelSpec {
    pub fn new(family: Family, d: usize) -> Self {
        ModelSpec { model: family, d, range: None }
    }

    pub fn bernoulli(p: f64, d: usize) -> Self {
        Self::new(Family::Bernoulli { p }, d)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.d < 2 {
            return bad(format!("d = {} must be at least 2", self.d));
        }
        let needs_transience = !matches!(self.model, Family::Bernoulli { .. });
        if needs_transience && self.d < 3 {
            return bad(format!("{} needs d >= 3", self.name()));
        }
        match self.model {
            Family::Bernoulli { p } if !(0.0..=1.0).contains(&p) => bad(format!("p = {p} outside [0, 1]")),
            Family::GffLevel { h, .. } if h.is_nan() => bad("h is NaN".into()),
            Family::GffLevel { pad: 0, .. } => bad("pad must be at least 1".into()),
            Family::Interlacement { u, capacity_trials, .. } | Family::VacantInterlacement { u, capacity_trials, .. }
                if !(u >= 0.0) || !u.is_finite() || capacity_trials == 0 =>
            {
                bad("interlacements need finite u >= 0 and capacity_trials >= 1".into())
            }
            Family::TorusVacant { u, n } if !(u >= 0.0) || !u.is_finite() || n < 4 => {
                bad("torus vacant set needs finite u >= 0 and N >= 4".into())
            }
            _ => Ok(()),
        }?;
        if let Some((a, b)) = self.range {
            if !(a < b) {
                return bad(format!("range ({a}, {b}) is empty"));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self.model {
            Family::Bernoulli { .. } => "bernoulli",
            Family::GffLevel { .. } => "gff_level",
            Family::Interlacement { .. } => "interlacement",
            Family::VacantInterlacement { .. } => "vacant_interlacement",
            Family::TorusVacant { .. } => "torus_vacant",
        }
    }

    /// The swept parameter: `p`, `h` or `u`.
    pub fn parameter(&self) -> f64 {
        match self.model {
            Family::Bernoulli { p } => p,
            Family::GffLevel { h, .. } => h,
            Family::Interlacement { u, .. } | Family::VacantInterlacement { u, .. } | Family::TorusVacant { u, .. } => u,
        }
    }

    pub fn with_parameter(&self, x: f64) -> ModelSpec {
        let mut s = self.clone();
        match &mut s.model {
            Family::Bernoulli { p } => *p = x,
            Family::GffLevel { h, .. } => *h = x,
            Family::Interlacement { u, .. } | Family::VacantInterlacement { u, .. } | Family::TorusVacant { u, .. } => *u = x,
        }
        s
    }

    /// Whether occupancy grows with the parameter under the coupling.
    pub fn increasing_in_parameter(&self) -> bool {
        matches!(self.model, Family::Bernoulli { .. } | Family::Interlacement { .. })
    }

    /// The window a torus family lives on; `None` for box families.
    pub fn torus_window(&self) -> Option<Result<Window>> {
        match self.model {
            Family::TorusVacant { n, .. } => Some(Window::torus(self.d, n)),
            _ => None,
        }
    }
}

enum Prepared {
    Bernoulli,
    Gff(Box<GffSampler>),
    Interlacement(Box<InterlacementSampler>),
    Torus,
}

/// A model spec bound to a window, with expensive precomputation (Green matrix
/// factor, equilibrium measure) done once and shared by every draw.
pub struct ModelSampler {
    spec: ModelSpec,
    window: Window,
    prepared: Prepared,
}

impl ModelSampler {
    /// `prep_seed` drives precomputation that is itself random (escape trials).
    pub fn new(spec: &ModelSpec, window: &Window, prep_seed: u64) -> Result<Self> {
        spec.validate()?;
        if window.dim() != spec.d {
            return Err(Error::DimensionMismatch { expected: spec.d, got: window.dim() });
        }
        let prepared = match spec.model {
            Family::Bernoulli { .. } => Prepared::Bernoulli,
            Family::GffLevel { pad, .. } => Prepared::Gff(Box::new(GffSampler::new(build_green_matrix(window, pad)?)?)),
            Family::Interlacement { escape_radius, capacity_trials, .. }
            | Family::VacantInterlacement { escape_radius, capacity_trials, .. } => Prepared::Interlacement(Box::new(
                InterlacementSampler::new(window, escape_radius, capacity_trials, prep_seed)?,
            )),
            Family::TorusVacant { n, .. } => {
                if *window != Window::torus(spec.d, n)? {
                    return Err(Error::InvalidWindow(format!("torus vacant set lives on the torus of side {n}")));
                }
                Prepared::Torus
            }
        };
        Ok(ModelSampler { spec: spec.clone(), window: window.clone(), prepared })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn gff(&self) -> Option<&GffSampler> {
        match &self.prepared {
            Prepared::Gff(g) => Some(g),
            _ => None,
        }
    }

    pub fn interlacement(&self) -> Option<&InterlacementSampler> {
        match &self.prepared {
            Prepared::Interlacement(s) => Some(s),
            _ => None,
        }
    }

    pub fn sample(&self, seed: u64) -> Result<Config> {
        Ok(self.sample_coupled(&[self.spec.parameter()], seed)?.pop().expect("one parameter"))
    }

    /// Samples at each parameter value from shared randomness.
    pub fn sample_coupled(&self, params: &[f64], seed: u64) -> Result<Vec<Config>> {
        for &x in params {
            self.spec.with_parameter(x).validate()?;
        }
        let tag = |x: f64| format!("{}({x})", self.spec.name());
        match &self.prepared {
            Prepared::Bernoulli => Ok(params
                .iter()
                .map(|&p| {
                    Config::from_fn(self.window.clone(), tag(p), seed, |i| bernoulli::site_uniform(seed, i) < p)
                })
                .collect()),
            Prepared::Gff(g) => {
                let field = g.sample(seed);
                params
                    .iter()
                    .map(|&h| {
                        let bits = BitField::from_fn(field.values.len(), |i| field.values[i] >= h);
                        Config::new(self.window.clone(), bits, tag(h), seed)
                    })
                    .collect()
            }
            Prepared::Interlacement(s) => {
                let traces = s.sample_levels(params, seed)?;
                let vacant = matches!(self.spec.model, Family::VacantInterlacement { .. });
                traces
                    .into_iter()
                    .zip(params)
                    .map(|(c, &u)| {
                        let bits = if vacant { c.occupancy().not() } else { c.occupancy().clone() };
                        Config::new(self.window.clone(), bits, tag(u), seed)
                    })
                    .collect()
            }
            Prepared::Torus => {
                let Family::TorusVacant { n, .. } = self.spec.model else { unreachable!() };
                let steps: Vec<u64> =
                    params.iter().map(|&u| torus::torus_steps(u, n, self.spec.d)).collect::<Result<_>>()?;
                let max = steps.iter().copied().max().unwrap_or(0);
                let first = if max == 0 {
                    vec![u64::MAX; self.window.len()]
                } else {
                    torus::torus_first_visits(&self.window, max, seed)
                };
                steps
                    .iter()
                    .zip(params)
                    .map(|(&t, &u)| {
                        // Zero steps still leaves the start site unvisited.
                        let bits = BitField::from_fn(self.window.len(), |i| t == 0 || first[i] > t);
                        Config::new(self.window.clone(), bits, tag(u), seed)
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_json_round_trip() {
        let s = ModelSpec {
            model: Family::Interlacement { u: 1.5, escape_radius: 20, capacity_trials: 1000 },
            d: 3,
            range: Some((0.5, 2.0)),
        };
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"model\":{\"family\":\"interlacement\""));
        let back: ModelSpec = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn validation() {
        assert!(ModelSpec::bernoulli(1.2, 2).validate().is_err());
        assert!(ModelSpec::new(Family::GffLevel { h: 0.0, pad: 3 }, 2).validate().is_err());
        assert!(ModelSpec::new(Family::GffLevel { h: 0.0, pad: 0 }, 3).validate().is_err());
        assert!(ModelSpec::new(Family::TorusVacant { u: 1.0, n: 3 }, 3).validate().is_err());
        assert!(ModelSpec::bernoulli(0.5, 2).validate().is_ok());
    }

    #[test]
    fn coupled_sweeps_are_monotone() {
        let w = Window::centered(3, 3).unwrap();
        let specs = [
            (ModelSpec::new(Family::GffLevel { h: 0.0, pad: 3 }, 3), [-0.5, 0.0, 0.5, 1.0]),
            (
                ModelSpec::new(Family::VacantInterlacement { u: 1.0, escape_radius: 14, capacity_trials: 3000 }, 3),
                [0.0, 0.2, 0.5, 1.0],
            ),
        ];
        for (spec, params) in specs {
            let s = ModelSampler::new(&spec, &w, 1).unwrap();
            let cs = s.sample_coupled(&params, 4).unwrap();
            for pair in cs.windows(2) {
                assert!(pair[1].occupancy().is_subset_of(pair[0].occupancy()));
            }
        }
        let t = ModelSpec::new(Family::TorusVacant { u: 0.5, n: 6 }, 3);
        let s = ModelSampler::new(&t, &Window::torus(3, 6).unwrap(), 0).unwrap();
        let cs = s.sample_coupled(&[0.0, 0.2, 0.5], 3).unwrap();
        assert_eq!(cs[0].occupied_count(), 216);
        assert!(cs[2].occupancy().is_subset_of(cs[1].occupancy()));
        assert_eq!(cs[2].occupancy(), sample_torus_vacant(0.5, 6, 3, 3).unwrap().occupancy());
    }

    #[test]
    fn sampling_is_deterministic() {
        let w = Window::new_box(vec![0, 0], vec![20, 20]).unwrap();
        let s = ModelSampler::new(&ModelSpec::bernoulli(0.6, 2), &w, 0).unwrap();
        assert_eq!(s.sample(9).unwrap(), s.sample(9).unwrap());
        assert_eq!(s.sample(9).unwrap().occupancy(), sample_bernoulli(0.6, &w, 9).occupancy());
    }
}

//! Monte Carlo estimators built on the samplers and cluster analytics.
//!
//! Trials run in parallel, each from its own derived seed, and are reduced
//! in trial order so every report is reproducible bit for bit.

pub mod covariance;
pub mod decorrelation;
pub mod density;
pub mod report;
pub mod shape;
pub mod stats;
pub mod stretch;
pub mod torus;

pub use covariance::{covariance_decay, pair_covariance, CovarianceDecay};
pub use decorrelation::{check_decorrelation, decorrelation_window, DecorrelationParams, DecorrelationReport, LocalEvent};
pub use density::{central_density, density_sweep, estimate_density, sampler, DensityEstimate, DensitySweep, PREP_STREAM};
pub use report::{run_trials, trial_seed, Observation, TrialRecord, TrialReport};
pub use shape::{
    convex_hull, convexity_violation, estimate_norm, estimate_shape, shape_sweep, shape_window, DirectionEstimate,
    NormEstimate, ShapeEstimate,
};
pub use stats::{linear_fit, median, quantile, summarize, LinearFit, Summary, MIN_TRIALS, Z95};
pub use stretch::{estimate_chem_stretch, probe_size, StretchEstimate};
pub use torus::{
    capped_set_diameter, check_torus_mesoscopic, double_sweep_diameter, exact_component_diameter, integer_root,
    torus_giant_diameter, MesoscopicReport, TorusDiameter,
};

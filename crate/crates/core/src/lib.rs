//! Correlated percolation on finite windows of `Z^d`.
//!
//! The crate covers model samplers (Bernoulli, Gaussian free field level
//! sets, random interlacements and their vacant sets, random walk vacant sets
//! on the torus), cluster analytics (components, chemical distance, the
//! projection pseudometric), multi-scale renormalization with explicit short
//! path construction, and Monte Carlo estimators built on top of them.

pub mod cluster;
pub mod error;
pub mod estimators;
pub mod events;
pub mod lattice;
pub mod renorm;
pub mod rng;
pub mod samplers;

pub use error::{Error, Result};
pub use lattice::{l1_diameter, l1_norm, linf_ball, BitField, Config, Geometry, Point, Window};

//! Experiment runner for `perco-core`: JSON configs in, reproducible
//! artifacts out.

pub mod config;
pub mod run;
pub mod svg;

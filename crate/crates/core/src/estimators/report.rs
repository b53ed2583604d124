//! Per-trial observables and their summaries.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{summarize, Summary};
use crate::error::Result;
use crate::rng::derive_seed;
use crate::samplers::ModelSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub name: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub aux: String,
}

impl Observation {
    pub fn new(name: impl Into<String>, value: f64) -> Self {
        Observation { name: name.into(), value, aux: String::new() }
    }

    pub fn with_aux(name: impl Into<String>, value: f64, aux: impl Into<String>) -> Self {
        Observation { name: name.into(), value, aux: aux.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub observations: Vec<Observation>,
    /// Reason the trial was left out of the summaries, if it was.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excluded: Option<String>,
}

/// Seeds, per-trial observables and summary statistics of one experiment.
/// The seed list reproduces every observable exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ModelSpec>,
    pub master_seed: u64,
    pub trials: Vec<TrialRecord>,
    /// Summary per observable name over the included trials.
    pub summary: BTreeMap<String, Summary>,
}

/// Seed of trial `t` under `master`.
pub fn trial_seed(master: u64, t: usize) -> u64 {
    derive_seed(master, t as u64)
}

/// Runs `f` on every trial in parallel. Results come back in trial order, so
/// the output does not depend on the number of worker threads.
pub fn run_trials<T: Send>(master: u64, trials: usize, f: impl Fn(usize, u64) -> T + Sync) -> Vec<T> {
    (0..trials).into_par_iter().map(|t| f(t, trial_seed(master, t))).collect()
}

impl TrialReport {
    pub fn new(spec: Option<ModelSpec>, master_seed: u64, trials: Vec<TrialRecord>) -> Self {
        TrialReport { spec, master_seed, trials, summary: BTreeMap::new() }
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.trials.iter().map(|t| t.seed).collect()
    }

    pub fn included(&self) -> impl Iterator<Item = &TrialRecord> {
        self.trials.iter().filter(|t| t.excluded.is_none())
    }

    /// Values of `name` over the included trials, in trial order.
    pub fn values(&self, name: &str) -> Vec<f64> {
        self.included().flat_map(|t| t.observations.iter().filter(|o| o.name == name).map(|o| o.value)).collect()
    }

    /// Summarizes each of `names`; errors below the minimum trial count.
    pub fn summarize(&mut self, names: &[&str]) -> Result<()> {
        for &n in names {
            let s = summarize(&self.values(n))?;
            self.summary.insert(n.to_string(), s);
        }
        Ok(())
    }

    /// Long-format CSV: `trial_id,seed,name,value,aux`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "trial_id,seed,name,value,aux")?;
        for t in &self.trials {
            for o in &t.observations {
                writeln!(w, "{},{},{},{},{}", t.trial, t.seed, csv_field(&o.name), o.value, csv_field(&o.aux))?;
            }
            if let Some(reason) = &t.excluded {
                writeln!(w, "{},{},excluded,NaN,{}", t.trial, t.seed, csv_field(reason))?;
            }
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

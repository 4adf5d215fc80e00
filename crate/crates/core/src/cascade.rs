//! One day of fast dynamics: random trigger outages, then repeated
//! redispatch with probabilistic failure of heavily loaded lines until no
//! further line trips.

use std::collections::BTreeSet;

use rand::Rng;

use crate::dispatch::{DcModel, DispatchOptions, DispatchSolution};
use crate::error::{Error, Result};
use crate::grid::GridNetwork;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeParams {
    /// Daily random outage probability per line.
    pub p0: f64,
    /// Failure probability of an overloaded line per redispatch.
    pub p1: f64,
    /// Loading ratio at which a line counts as overloaded (inclusive).
    pub overload_threshold: f64,
    /// Shed fraction above which a day is a blackout (strict).
    pub blackout_threshold: f64,
    pub dispatch: DispatchOptions,
}

impl Default for CascadeParams {
    fn default() -> Self {
        Self {
            p0: 1e-4,
            p1: 0.05,
            overload_threshold: 0.9,
            blackout_threshold: 1e-3,
            dispatch: DispatchOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeResult {
    /// Every line out at the end, triggers included.
    pub failed_lines: BTreeSet<usize>,
    /// Lines that were at or above the overload threshold at any step.
    pub overloaded_lines: BTreeSet<usize>,
    /// Number of dispatch solves.
    pub steps: usize,
    pub load_shed: f64,
    pub demand: f64,
    pub is_blackout: bool,
    /// No line failed, yet available generation fell short of demand.
    pub shortfall_only: bool,
}

impl CascadeResult {
    pub fn size(&self) -> f64 {
        if self.demand > 0.0 {
            self.load_shed / self.demand
        } else {
            0.0
        }
    }
}

/// Each in-service line, in id order, fails with probability `p0`.
pub fn trigger_outages<R: Rng + ?Sized>(network: &GridNetwork, p0: f64, rng: &mut R) -> BTreeSet<usize> {
    network
        .lines
        .iter()
        .filter(|l| l.in_service)
        .filter_map(|l| (rng.random::<f64>() < p0).then_some(l.id))
        .collect()
}

/// `load_shed / demand > threshold`, strictly.
pub fn classify_blackout(load_shed: f64, demand: f64, threshold: f64) -> Result<bool> {
    if !(demand > 0.0) {
        return Err(Error::Domain(format!("demand must be positive, got {demand}")));
    }
    if !(load_shed >= 0.0) {
        return Err(Error::Domain(format!(
            "load shed must be non-negative, got {load_shed}"
        )));
    }
    Ok(load_shed / demand > threshold)
}

/// Runs the cascade on a private copy of the line statuses; `network` is not
/// modified.
pub fn run_cascade<R: Rng + ?Sized>(
    network: &GridNetwork,
    demand: &[f64],
    available: &[f64],
    triggers: &BTreeSet<usize>,
    params: &CascadeParams,
    rng: &mut R,
) -> Result<CascadeResult> {
    run_cascade_from(network, demand, available, triggers, params, None, rng)
}

/// As [`run_cascade`]; when there are no triggers, `base` (the dispatch of
/// the intact network for the same inputs) stands in for the first solve.
pub fn run_cascade_from<R: Rng + ?Sized>(
    network: &GridNetwork,
    demand: &[f64],
    available: &[f64],
    triggers: &BTreeSet<usize>,
    params: &CascadeParams,
    base: Option<&DispatchSolution>,
    rng: &mut R,
) -> Result<CascadeResult> {
    let mut in_service: Vec<bool> = network.lines.iter().map(|l| l.in_service).collect();
    for &t in triggers {
        if t >= in_service.len() || !in_service[t] {
            return Err(Error::Contract(format!("trigger line {t} is not in service")));
        }
        in_service[t] = false;
    }

    let mut failed = triggers.clone();
    let mut overloaded = BTreeSet::new();
    let mut steps = 0;
    let mut reuse = if triggers.is_empty() { base } else { None };
    let solution = loop {
        let solution = match reuse.take() {
            Some(s) => s.clone(),
            None => {
                DcModel::with_service(network, &in_service, params.dispatch)?.dispatch(network, demand, available)?
            }
        };
        steps += 1;

        let mut tripped = Vec::new();
        for (l, &m) in solution.loading.iter().enumerate() {
            if in_service[l] && m >= params.overload_threshold {
                overloaded.insert(l);
                if rng.random::<f64>() < params.p1 {
                    tripped.push(l);
                }
            }
        }
        if tripped.is_empty() {
            break solution;
        }
        for l in tripped {
            in_service[l] = false;
            failed.insert(l);
        }
    };

    let total_demand = solution.total_demand;
    let load_shed = solution.total_shed;
    let is_blackout = total_demand > 0.0 && load_shed / total_demand > params.blackout_threshold;
    let capacity: f64 = available.iter().sum();
    let shortfall_only = failed.is_empty() && load_shed > 0.0 && capacity < total_demand;
    Ok(CascadeResult {
        failed_lines: failed,
        overloaded_lines: overloaded,
        steps,
        load_shed,
        demand: total_demand,
        is_blackout,
        shortfall_only,
    })
}

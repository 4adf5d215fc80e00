//! Transmission network and demand domain types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of bus demand fractions.
pub const FRACTION_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Conventional,
    Solar,
    Wind,
}

impl GeneratorKind {
    pub fn is_renewable(self) -> bool {
        !matches!(self, GeneratorKind::Conventional)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: usize,
    pub name: String,
    /// Share of the system peak demand placed at this bus.
    pub demand_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub id: usize,
    #[serde(rename = "from")]
    pub from_bus: usize,
    #[serde(rename = "to")]
    pub to_bus: usize,
    /// Per-unit susceptance.
    pub susceptance: f64,
    #[serde(rename = "flow_limit_mw")]
    pub flow_limit: f64,
    #[serde(default = "in_service_default", skip_serializing_if = "is_true")]
    pub in_service: bool,
}

fn in_service_default() -> bool {
    true
}

fn is_true(v: &bool) -> bool {
    *v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub id: usize,
    pub bus: usize,
    pub kind: GeneratorKind,
    #[serde(rename = "capacity_mw")]
    pub capacity: f64,
    pub marginal_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridNetwork {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
}

impl GridNetwork {
    pub fn num_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn num_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn demand_fractions(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.demand_fraction).collect()
    }

    pub fn total_capacity(&self) -> f64 {
        self.generators.iter().map(|g| g.capacity).sum()
    }

    pub fn max_marginal_cost(&self) -> f64 {
        self.generators.iter().map(|g| g.marginal_cost).fold(0.0, f64::max)
    }

    /// Checks every structural invariant; the error names the violated rule.
    pub fn validate(&self) -> Result<()> {
        if self.buses.is_empty() {
            return Err(Error::Validation("network has no buses".into()));
        }
        for (i, bus) in self.buses.iter().enumerate() {
            if bus.id != i {
                return Err(Error::Validation(format!(
                    "bus ids must be dense and ordered 0..B-1 (position {i} has id {})",
                    bus.id
                )));
            }
            if !(0.0..=1.0).contains(&bus.demand_fraction) {
                return Err(Error::Validation(format!(
                    "bus {i}: demand fraction {} outside [0, 1]",
                    bus.demand_fraction
                )));
            }
        }
        let sum: f64 = self.buses.iter().map(|b| b.demand_fraction).sum();
        if (sum - 1.0).abs() > FRACTION_SUM_TOL {
            return Err(Error::Validation(format!("demand fractions sum ≠ 1 (got {sum})")));
        }

        let nb = self.buses.len();
        for (i, line) in self.lines.iter().enumerate() {
            if line.id != i {
                return Err(Error::Validation(format!(
                    "line ids must be dense and ordered (position {i} has id {})",
                    line.id
                )));
            }
            if line.from_bus >= nb || line.to_bus >= nb {
                return Err(Error::Validation(format!(
                    "line {i} references a missing bus ({} -> {})",
                    line.from_bus, line.to_bus
                )));
            }
            if line.from_bus == line.to_bus {
                return Err(Error::Validation(format!(
                    "line {i} connects bus {} to itself",
                    line.from_bus
                )));
            }
            if !(line.susceptance > 0.0 && line.susceptance.is_finite()) {
                return Err(Error::Validation(format!("line {i}: susceptance must be positive")));
            }
            if !(line.flow_limit > 0.0) {
                return Err(Error::Validation(format!("line {i}: flow limit must be positive")));
            }
        }

        for (i, g) in self.generators.iter().enumerate() {
            if g.id != i {
                return Err(Error::Validation(format!(
                    "generator ids must be dense and ordered (position {i} has id {})",
                    g.id
                )));
            }
            if g.bus >= nb {
                return Err(Error::Validation(format!(
                    "generator {i} references missing bus {}",
                    g.bus
                )));
            }
            if !(g.capacity >= 0.0) {
                return Err(Error::Validation(format!(
                    "generator {i}: capacity must be non-negative"
                )));
            }
            if !(g.marginal_cost >= 0.0) {
                return Err(Error::Validation(format!(
                    "generator {i}: marginal cost must be non-negative"
                )));
            }
        }
        let max_res = self
            .generators
            .iter()
            .filter(|g| g.kind.is_renewable())
            .map(|g| g.marginal_cost)
            .fold(f64::NEG_INFINITY, f64::max);
        let min_conv = self
            .generators
            .iter()
            .filter(|g| !g.kind.is_renewable())
            .map(|g| g.marginal_cost)
            .fold(f64::INFINITY, f64::min);
        if max_res >= min_conv {
            return Err(Error::Validation(
                "renewable marginal costs must be below every conventional marginal cost".into(),
            ));
        }
        Ok(())
    }
}

/// Seasonal daily-peak demand for one calendar year.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandProfile {
    base_peaks: Vec<f64>,
    annual_mean: f64,
}

impl DemandProfile {
    pub const DAYS: usize = 365;

    pub fn new(base_peaks: Vec<f64>) -> Result<Self> {
        if base_peaks.len() != Self::DAYS {
            return Err(Error::Validation(format!(
                "demand profile needs {} daily peaks, got {}",
                Self::DAYS,
                base_peaks.len()
            )));
        }
        if let Some(day) = base_peaks.iter().position(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::Validation(format!(
                "demand profile day {day}: peak must be positive"
            )));
        }
        let annual_mean = base_peaks.iter().sum::<f64>() / Self::DAYS as f64;
        Ok(Self {
            base_peaks,
            annual_mean,
        })
    }

    /// `mean × (1 + amplitude·cos(2π(day − peak_day)/365))`, peaking mid-July.
    ///
    /// The cosine has zero mean over the 365 sample days, so the annual mean
    /// is `mean` up to rounding.
    pub fn seasonal(mean: f64, amplitude: f64) -> Result<Self> {
        const PEAK_DAY: f64 = 196.0;
        let peaks = (0..Self::DAYS)
            .map(|d| {
                let phase = 2.0 * std::f64::consts::PI * (d as f64 - PEAK_DAY) / Self::DAYS as f64;
                mean * (1.0 + amplitude * phase.cos())
            })
            .collect();
        Self::new(peaks)
    }

    pub fn base_peaks(&self) -> &[f64] {
        &self.base_peaks
    }

    /// `P_D0`, the arithmetic mean of the base peaks.
    pub fn annual_mean(&self) -> f64 {
        self.annual_mean
    }

    pub fn peak(&self, day: u64) -> f64 {
        self.base_peaks[(day % Self::DAYS as u64) as usize]
    }
}

/// Spreads a system peak over buses by their demand fractions.
pub fn nodal_demand(fractions: &[f64], system_peak: f64) -> Result<Vec<f64>> {
    if !(system_peak > 0.0) {
        return Err(Error::Domain(format!(
            "system peak must be positive, got {system_peak}"
        )));
    }
    Ok(fractions.iter().map(|f| f * system_peak).collect())
}

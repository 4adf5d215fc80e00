//! Blackout records, risk, performance, grid stress and seasonal coverage
//! histograms. Accumulators merge associatively so realizations can be
//! reduced in any grouping.

use serde::{Deserialize, Serialize};

use crate::cascade::CascadeResult;
use crate::error::{Error, Result};
use crate::res::month_of_day;

pub const HISTOGRAM_WIDTH: f64 = 0.01;
pub const HISTOGRAM_MAX: f64 = 1.5;
pub const HISTOGRAM_BINS: usize = 150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlackoutCause {
    Cascade,
    Shortfall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlackoutRecord {
    pub day: u64,
    pub load_shed: f64,
    pub demand: f64,
    pub size: f64,
    pub cause: BlackoutCause,
    pub lines_failed: usize,
}

impl BlackoutRecord {
    /// The record for a blackout day, `None` otherwise.
    pub fn from_cascade(day: u64, result: &CascadeResult) -> Option<Self> {
        result.is_blackout.then(|| Self {
            day,
            load_shed: result.load_shed,
            demand: result.demand,
            size: result.size(),
            cause: if result.shortfall_only {
                BlackoutCause::Shortfall
            } else {
                BlackoutCause::Cascade
            },
            lines_failed: result.failed_lines.len(),
        })
    }
}

/// `⟨P_S/P_D⟩` over the series.
pub fn performance(supplied: &[f64], demand: &[f64]) -> Result<f64> {
    if supplied.len() != demand.len() {
        return Err(Error::Contract(format!(
            "series lengths differ ({} vs {})",
            supplied.len(),
            demand.len()
        )));
    }
    if supplied.is_empty() {
        return Ok(0.0);
    }
    if demand.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Contract("daily demand must be positive".into()));
    }
    let sum: f64 = supplied.iter().zip(demand).map(|(s, d)| s / d).sum();
    Ok(sum / supplied.len() as f64)
}

/// Mean over days of the per-day mean loading ratio.
pub fn grid_stress<'a>(daily_loadings: impl IntoIterator<Item = &'a [f64]>) -> f64 {
    let mut days = 0usize;
    let mut sum = 0.0;
    for day in daily_loadings {
        days += 1;
        if !day.is_empty() {
            sum += day.iter().sum::<f64>() / day.len() as f64;
        }
    }
    if days == 0 {
        0.0
    } else {
        sum / days as f64
    }
}

/// Expected yearly blackout cost, each blackout costing `size^exponent`.
pub fn risk(records: &[BlackoutRecord], horizon_days: u64, exponent: f64) -> Result<f64> {
    if horizon_days == 0 {
        return Err(Error::Domain("risk needs a positive horizon".into()));
    }
    let cost: f64 = records.iter().map(|r| r.size.powf(exponent)).sum();
    Ok(cost * 365.0 / horizon_days as f64)
}

pub fn normalize_risk(raw: f64, baseline_raw: f64) -> Result<f64> {
    if !(baseline_raw > 0.0) {
        return Err(Error::Domain("baseline risk is zero; lengthen the baseline run".into()));
    }
    Ok(raw / baseline_raw)
}

/// Fixed-width histogram on `[0, 1.5]`; values above the range land in the
/// last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageHistogram {
    pub counts: Vec<u64>,
    pub total: u64,
    pub sum: f64,
}

impl Default for CoverageHistogram {
    fn default() -> Self {
        Self {
            counts: vec![0; HISTOGRAM_BINS],
            total: 0,
            sum: 0.0,
        }
    }
}

impl CoverageHistogram {
    pub fn bin_of(x: f64) -> usize {
        let i = (x.max(0.0) / HISTOGRAM_WIDTH + 1e-9).floor() as usize;
        i.min(HISTOGRAM_BINS - 1)
    }

    pub fn add(&mut self, x: f64) {
        self.counts[Self::bin_of(x)] += 1;
        self.total += 1;
        self.sum += x;
    }

    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        self.sum += other.sum;
    }

    /// Probability mass per bin; sums to one unless empty.
    pub fn mass(&self) -> Vec<f64> {
        if self.total == 0 {
            return vec![0.0; HISTOGRAM_BINS];
        }
        self.counts.iter().map(|&c| c as f64 / self.total as f64).collect()
    }

    /// Probability density per bin (mass / width).
    pub fn density(&self) -> Vec<f64> {
        self.mass().into_iter().map(|m| m / HISTOGRAM_WIDTH).collect()
    }

    pub fn mean(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.sum / self.total as f64
        }
    }

    pub fn bin_left_edge(i: usize) -> f64 {
        i as f64 * HISTOGRAM_WIDTH
    }
}

/// One histogram per calendar month; `first_day_of_year` is the calendar day
/// of `ratios[0]`.
pub fn seasonal_coverage(ratios: &[f64], first_day_of_year: usize) -> Vec<CoverageHistogram> {
    let mut out = vec![CoverageHistogram::default(); 12];
    for (k, &r) in ratios.iter().enumerate() {
        out[month_of_day((first_day_of_year + k) % 365)].add(r);
    }
    out
}

/// Pools several months into one histogram.
pub fn pooled(histograms: &[CoverageHistogram], months: impl IntoIterator<Item = usize>) -> CoverageHistogram {
    let mut h = CoverageHistogram::default();
    for m in months {
        h.merge(&histograms[m]);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStatistics {
    pub horizon_days: u64,
    pub performance: f64,
    pub stress: f64,
    pub risk_raw: f64,
    /// Blackouts per year.
    pub blackout_frequency: f64,
    pub cascade_blackouts: usize,
    pub shortfall_blackouts: usize,
    pub monthly_coverage: Vec<CoverageHistogram>,
    /// Mean `ΔP_G` of each completed year.
    pub annual_margins: Vec<f64>,
    pub records: Vec<BlackoutRecord>,
}

/// Running sums for one run (or several merged runs of equal weight per day).
#[derive(Debug, Clone, PartialEq)]
pub struct RunAccumulator {
    pub days: u64,
    pub ratio_sum: f64,
    pub stress_sum: f64,
    pub records: Vec<BlackoutRecord>,
    pub monthly_coverage: Vec<CoverageHistogram>,
    pub annual_margins: Vec<f64>,
}

impl Default for RunAccumulator {
    fn default() -> Self {
        Self {
            days: 0,
            ratio_sum: 0.0,
            stress_sum: 0.0,
            records: Vec::new(),
            monthly_coverage: vec![CoverageHistogram::default(); 12],
            annual_margins: Vec::new(),
        }
    }
}

impl RunAccumulator {
    /// One day: RES share of demand and the base-case mean loading.
    pub fn add_day(&mut self, day_of_year: usize, res_ratio: f64, mean_loading: f64) {
        self.days += 1;
        self.ratio_sum += res_ratio;
        self.stress_sum += mean_loading;
        self.monthly_coverage[month_of_day(day_of_year)].add(res_ratio);
    }

    pub fn add_record(&mut self, record: BlackoutRecord) {
        self.records.push(record);
    }

    pub fn merge(&mut self, other: &Self) {
        self.days += other.days;
        self.ratio_sum += other.ratio_sum;
        self.stress_sum += other.stress_sum;
        self.records.extend(other.records.iter().cloned());
        for (a, b) in self.monthly_coverage.iter_mut().zip(&other.monthly_coverage) {
            a.merge(b);
        }
        self.annual_margins.extend_from_slice(&other.annual_margins);
    }

    pub fn finish(self, risk_exponent: f64) -> Result<RunStatistics> {
        if self.days == 0 {
            return Err(Error::Domain("no simulated days".into()));
        }
        let days = self.days as f64;
        let shortfall = self
            .records
            .iter()
            .filter(|r| r.cause == BlackoutCause::Shortfall)
            .count();
        Ok(RunStatistics {
            horizon_days: self.days,
            performance: self.ratio_sum / days,
            stress: self.stress_sum / days,
            risk_raw: risk(&self.records, self.days, risk_exponent)?,
            blackout_frequency: self.records.len() as f64 * 365.0 / days,
            cascade_blackouts: self.records.len() - shortfall,
            shortfall_blackouts: shortfall,
            monthly_coverage: self.monthly_coverage,
            annual_margins: self.annual_margins,
            records: self.records,
        })
    }
}

//! Tabular outputs and the plot-data transforms that read them back.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use gridopa::metrics::{pooled, CoverageHistogram};
use gridopa::res::PlantKind;
use gridopa::scenario::{mean_std, median, RealizationResult, ScenarioConfig, SweepRow, SUMMER_MONTHS, WINTER_MONTHS};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealizationRow {
    pub scenario: String,
    pub penetration: f64,
    pub n_plants: usize,
    pub n_wind: usize,
    pub index: usize,
    pub seed: u64,
    pub performance: f64,
    pub stress: f64,
    pub risk_raw: f64,
    pub risk_normalized: f64,
    pub blackouts_per_year: f64,
    pub cascade_blackouts: usize,
    pub shortfall_blackouts: usize,
    pub optimal: bool,
    /// Space-separated bus ids.
    pub placement: String,
    /// `s`/`w` per plant.
    pub kinds: String,
}

impl RealizationRow {
    pub fn new(config: &ScenarioConfig, r: &RealizationResult, optimal: bool) -> Self {
        let n = r.placement.len();
        Self {
            scenario: config.name.clone(),
            penetration: if n > 0 { config.penetration } else { 0.0 },
            n_plants: n,
            n_wind: r.kinds.iter().filter(|k| **k == PlantKind::Wind).count(),
            index: r.index,
            seed: r.seed,
            performance: r.stats.performance,
            stress: r.stats.stress,
            risk_raw: r.stats.risk_raw,
            risk_normalized: r.normalized_risk.unwrap_or(f64::NAN),
            blackouts_per_year: r.stats.blackout_frequency,
            cascade_blackouts: r.stats.cascade_blackouts,
            shortfall_blackouts: r.stats.shortfall_blackouts,
            optimal,
            placement: r.placement.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" "),
            kinds: r
                .kinds
                .iter()
                .map(|k| match k {
                    PlantKind::Solar => "s",
                    PlantKind::Wind => "w",
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageRow {
    pub month: usize,
    pub bin_left: f64,
    pub count: u64,
    pub density: f64,
}

pub fn coverage_rows(results: &[RealizationResult]) -> Vec<CoverageRow> {
    let mut rows = Vec::new();
    for month in 0..12 {
        let mut h = CoverageHistogram::default();
        for r in results {
            h.merge(&r.stats.monthly_coverage[month]);
        }
        for (i, (&count, density)) in h.counts.iter().zip(h.density()).enumerate() {
            rows.push(CoverageRow {
                month: month + 1,
                bin_left: CoverageHistogram::bin_left_edge(i),
                count,
                density,
            });
        }
    }
    rows
}

pub fn write_rows<T: Serialize>(rows: &[T], out: Box<dyn Write>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row.with_context(|| format!("reading {}", path.display()))?);
    }
    Ok(rows)
}

fn header_of(path: &Path) -> Result<Vec<String>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(r.headers()?.iter().map(str::to_string).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    RiskPerf,
    StressN,
    CoveragePdf,
    Penetration,
    WindMix,
}

#[derive(Serialize)]
struct RiskPerfPoint {
    n_plants: usize,
    performance: f64,
    risk_normalized: f64,
    optimal: bool,
}

#[derive(Serialize)]
struct StressPoint {
    n_plants: usize,
    realizations: usize,
    stress_mean: f64,
    stress_optimal: f64,
}

#[derive(Serialize)]
struct CoveragePoint {
    season: &'static str,
    bin_left: f64,
    density: f64,
}

#[derive(Serialize)]
struct PenetrationPoint {
    penetration: f64,
    n_plants: usize,
    risk_normalized: f64,
    risk_normalized_median: f64,
    performance_mean: f64,
    stress_mean: f64,
}

#[derive(Serialize)]
struct WindPoint {
    n_wind: usize,
    n_plants: usize,
    wind_share: f64,
    risk_normalized: f64,
    performance_mean: f64,
    performance_std: f64,
    stress_mean: f64,
}

/// Turns result tables into the columns one plot needs.
pub fn emit(figure: Figure, inputs: &[std::path::PathBuf], out: Box<dyn Write>) -> Result<()> {
    match figure {
        Figure::RiskPerf => {
            let rows = realization_rows(inputs)?;
            let points: Vec<RiskPerfPoint> = rows
                .into_iter()
                .map(|r| RiskPerfPoint {
                    n_plants: r.n_plants,
                    performance: r.performance,
                    risk_normalized: r.risk_normalized,
                    optimal: r.optimal,
                })
                .collect();
            write_rows(&points, out)
        }
        Figure::StressN => {
            let mut by_n: BTreeMap<usize, (Vec<f64>, f64)> = BTreeMap::new();
            for r in realization_rows(inputs)? {
                let e = by_n.entry(r.n_plants).or_insert((Vec::new(), f64::NAN));
                e.0.push(r.stress);
                if r.optimal {
                    e.1 = r.stress;
                }
            }
            let points: Vec<StressPoint> = by_n
                .into_iter()
                .map(|(n, (s, opt))| StressPoint {
                    n_plants: n,
                    realizations: s.len(),
                    stress_mean: mean_std(&s).0,
                    stress_optimal: opt,
                })
                .collect();
            write_rows(&points, out)
        }
        Figure::CoveragePdf => {
            let mut months = vec![CoverageHistogram::default(); 12];
            for path in inputs {
                for row in read_rows::<CoverageRow>(path)? {
                    if !(1..=12).contains(&row.month) {
                        bail!("{}: month {} outside 1..12", path.display(), row.month);
                    }
                    let h = &mut months[row.month - 1];
                    let bin = CoverageHistogram::bin_of(row.bin_left);
                    h.counts[bin] += row.count;
                    h.total += row.count;
                }
            }
            let mut points = Vec::new();
            for (season, set) in [("winter", WINTER_MONTHS), ("summer", SUMMER_MONTHS)] {
                let h = pooled(&months, set);
                for (i, d) in h.density().into_iter().enumerate() {
                    points.push(CoveragePoint {
                        season,
                        bin_left: CoverageHistogram::bin_left_edge(i),
                        density: d,
                    });
                }
            }
            write_rows(&points, out)
        }
        Figure::Penetration => {
            let points: Vec<PenetrationPoint> = sweep_rows(inputs)?
                .into_iter()
                .map(|r| PenetrationPoint {
                    penetration: r.penetration,
                    n_plants: r.n_plants,
                    risk_normalized: r.risk_normalized,
                    risk_normalized_median: r.risk_normalized_median,
                    performance_mean: r.performance_mean,
                    stress_mean: r.stress_mean,
                })
                .collect();
            write_rows(&points, out)
        }
        Figure::WindMix => {
            let points: Vec<WindPoint> = sweep_rows(inputs)?
                .into_iter()
                .map(|r| WindPoint {
                    n_wind: r.n_wind,
                    n_plants: r.n_plants,
                    wind_share: if r.n_plants > 0 {
                        r.n_wind as f64 / r.n_plants as f64
                    } else {
                        0.0
                    },
                    risk_normalized: r.risk_normalized,
                    performance_mean: r.performance_mean,
                    performance_std: r.performance_std,
                    stress_mean: r.stress_mean,
                })
                .collect();
            write_rows(&points, out)
        }
    }
}

fn realization_rows(inputs: &[std::path::PathBuf]) -> Result<Vec<RealizationRow>> {
    let mut rows = Vec::new();
    for path in inputs {
        if !header_of(path)?.iter().any(|h| h == "seed") {
            bail!(
                "{} is not a per-realization table (run `montecarlo --out`)",
                path.display()
            );
        }
        rows.extend(read_rows::<RealizationRow>(path)?);
    }
    Ok(rows)
}

fn sweep_rows(inputs: &[std::path::PathBuf]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for path in inputs {
        if !header_of(path)?.iter().any(|h| h == "risk_normalized_median") {
            bail!("{} is not a sweep table (run `sweep --out`)", path.display());
        }
        rows.extend(read_rows::<SweepRow>(path)?);
    }
    Ok(rows)
}

/// One-line aggregate of a Monte Carlo study.
pub fn summary(results: &[RealizationResult]) -> String {
    let perf: Vec<f64> = results.iter().map(|r| r.stats.performance).collect();
    let stress: Vec<f64> = results.iter().map(|r| r.stats.stress).collect();
    let risk: Vec<f64> = results.iter().filter_map(|r| r.normalized_risk).collect();
    let (pm, ps) = mean_std(&perf);
    format!(
        "realizations {}  performance {pm:.4} ± {ps:.4}  stress {:.4}  normalized risk mean {:.4} median {:.4}",
        results.len(),
        mean_std(&stress).0,
        mean_std(&risk).0,
        median(&risk)
    )
}

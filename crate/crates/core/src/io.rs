//! File formats: network TOML, demand profile CSV, plant profile CSV and
//! plain production series.
//!
//! A network file looks like
//!
//! ```toml
//! format = "gridopa-net/1"
//!
//! [[buses]]
//! id = 0
//! name = "north"
//! demand_fraction = 0.4
//!
//! [[lines]]
//! id = 0
//! from = 0
//! to = 1
//! susceptance = 1.0
//! flow_limit_mw = 120.0
//!
//! [[generators]]
//! id = 0
//! bus = 0
//! kind = "conventional"   # or "solar", "wind"
//! capacity_mw = 300.0
//! marginal_cost = 1.0
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Bus, DemandProfile, Generator, GridNetwork, Line};
use crate::res::{PlantKind, PlantProfile};

pub const NETWORK_FORMAT: &str = "gridopa-net/1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    format: String,
    #[serde(default)]
    buses: Vec<Bus>,
    #[serde(default)]
    lines: Vec<Line>,
    #[serde(default)]
    generators: Vec<Generator>,
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parses and validates a network document; `path` only labels errors.
pub fn parse_network(text: &str, path: &Path) -> Result<GridNetwork> {
    let file: NetworkFile = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of_offset(text, s.start)).unwrap_or(0);
        Error::format(path, line, e.message().to_string())
    })?;
    if file.format != NETWORK_FORMAT {
        let line = text
            .lines()
            .position(|l| l.trim_start().starts_with("format"))
            .map_or(1, |i| i + 1);
        return Err(Error::format(
            path,
            line,
            format!("unsupported format {:?}, expected {NETWORK_FORMAT:?}", file.format),
        ));
    }
    let network = GridNetwork {
        buses: file.buses,
        lines: file.lines,
        generators: file.generators,
    };
    network.validate()?;
    Ok(network)
}

pub fn load_network(path: impl AsRef<Path>) -> Result<GridNetwork> {
    let path = path.as_ref();
    parse_network(&read(path)?, path)
}

pub fn network_to_string(network: &GridNetwork) -> Result<String> {
    let file = NetworkFile {
        format: NETWORK_FORMAT.to_string(),
        buses: network.buses.clone(),
        lines: network.lines.clone(),
        generators: network.generators.clone(),
    };
    toml::to_string(&file).map_err(|e| Error::Internal(format!("network serialization: {e}")))
}

pub fn save_network(network: &GridNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, network_to_string(network)?).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::format(path, line, e.to_string())
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

#[derive(Debug, Deserialize)]
struct DemandRow {
    day_index: usize,
    peak_mw: f64,
}

/// Reads 365 rows of `day_index,peak_mw`.
pub fn load_demand_profile(path: impl AsRef<Path>) -> Result<DemandProfile> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut peaks = Vec::with_capacity(DemandProfile::DAYS);
    for row in csv_reader(&text).deserialize::<DemandRow>() {
        let row = row.map_err(|e| csv_error(path, e))?;
        if row.day_index != peaks.len() {
            return Err(Error::format(
                path,
                peaks.len() + 2,
                format!("expected day_index {}, found {}", peaks.len(), row.day_index),
            ));
        }
        peaks.push(row.peak_mw);
    }
    DemandProfile::new(peaks)
}

#[derive(Debug, Deserialize)]
struct ProfileRow {
    kind: PlantKind,
    month: usize,
    mean_normalized: f64,
    sigma_normalized: f64,
}

/// Profiles present in the file, keyed by kind. Each listed kind needs all
/// twelve months (1–12).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfileOverrides {
    pub solar: Option<PlantProfile>,
    pub wind: Option<PlantProfile>,
}

impl ProfileOverrides {
    pub fn get(&self, kind: PlantKind) -> Option<&PlantProfile> {
        match kind {
            PlantKind::Solar => self.solar.as_ref(),
            PlantKind::Wind => self.wind.as_ref(),
        }
    }
}

/// Reads `kind,month,mean_normalized,sigma_normalized` rows.
pub fn load_plant_profiles(path: impl AsRef<Path>) -> Result<ProfileOverrides> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut seen = [[false; 12]; 2];
    let mut profiles = [PlantProfile {
        monthly_means: [0.0; 12],
        daily_sigma: [0.0; 12],
    }; 2];
    for (i, row) in csv_reader(&text).deserialize::<ProfileRow>().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = i + 2;
        if !(1..=12).contains(&row.month) {
            return Err(Error::format(path, line, format!("month {} outside 1..12", row.month)));
        }
        if !(row.mean_normalized >= 0.0 && row.sigma_normalized >= 0.0) {
            return Err(Error::format(path, line, "mean and sigma must be non-negative"));
        }
        let k = row.kind as usize;
        let m = row.month - 1;
        if seen[k][m] {
            return Err(Error::format(
                path,
                line,
                format!("duplicate {:?} month {}", row.kind, row.month),
            ));
        }
        seen[k][m] = true;
        profiles[k].monthly_means[m] = row.mean_normalized;
        profiles[k].daily_sigma[m] = row.sigma_normalized;
    }
    let mut out = ProfileOverrides::default();
    for (k, kind) in [PlantKind::Solar, PlantKind::Wind].into_iter().enumerate() {
        let count = seen[k].iter().filter(|&&s| s).count();
        match count {
            0 => {}
            12 => match kind {
                PlantKind::Solar => out.solar = Some(profiles[k]),
                PlantKind::Wind => out.wind = Some(profiles[k]),
            },
            _ => {
                return Err(Error::Validation(format!(
                    "{}: {kind:?} profile lists {count} of 12 months",
                    path.display()
                )))
            }
        }
    }
    Ok(out)
}

/// Reads a daily series: one value per row, taken from the last column, with
/// a header line.
pub fn load_series(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut values = Vec::new();
    for record in csv_reader(&text).records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = record
            .iter()
            .next_back()
            .ok_or_else(|| Error::format(path, line, "empty row"))?;
        let v: f64 = field
            .parse()
            .map_err(|_| Error::format(path, line, format!("not a number: {field:?}")))?;
        values.push(v);
    }
    Ok(values)
}

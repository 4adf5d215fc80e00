//! Scenario configuration, realization runs, Monte Carlo studies, optimal
//! placement selection and parameter sweeps.
//!
//! Seeds: realization `i` runs with [`realization_seed`]`(master_seed, i)`;
//! inside a realization placement, demand noise, weather, trigger outages
//! and overload failures each draw from their own stream (see [`crate::rng`]).
//! A scenario and its zero-renewable baseline therefore see the same demand
//! and outage draws for the same seed.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{run_cascade_from, trigger_outages, CascadeParams};
use crate::dispatch::{DcModel, DispatchOptions};
use crate::error::{Error, Result};
use crate::evolution::{EvolutionParams, SystemState};
use crate::grid::{nodal_demand, DemandProfile, Generator, GeneratorKind, GridNetwork};
use crate::io::{load_demand_profile, load_network, load_plant_profiles, ProfileOverrides};
use crate::metrics::{normalize_risk, BlackoutRecord, RunAccumulator, RunStatistics};
use crate::reference::balearic_like;
use crate::res::{
    month_of_day, sample_production, CorrelationSet, PlantKind, PlantProfile, PlantTemplate, ResPlant, WeatherDraws,
};
use crate::rng::{realization_seed, stream, Stream};

/// Where the renewable plants go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Placement {
    /// `"random"`: distinct buses drawn per realization.
    Mode(String),
    /// Bus of each plant, in plant order.
    Explicit(Vec<usize>),
}

impl Default for Placement {
    fn default() -> Self {
        Placement::Mode("random".into())
    }
}

macro_rules! defaults {
    ($($name:ident: $ty:ty = $value:expr;)*) => {
        $(fn $name() -> $ty { $value })*
    };
}

defaults! {
    default_name: String = "scenario".into();
    default_mean_demand: f64 = 1000.0;
    default_amplitude: f64 = 0.25;
    default_horizon: u64 = 100_000;
    default_critical_margin: f64 = 0.4;
    default_realizations: usize = 256;
    default_p0: f64 = 1e-4;
    default_p1: f64 = 0.05;
    default_mu: f64 = 1.04;
    default_kappa: f64 = crate::res::KAPPA;
    default_blackout_threshold: f64 = 1e-3;
    default_overload_threshold: f64 = 0.9;
    default_shed_penalty: f64 = 100.0;
    default_noise: f64 = 0.05;
    default_growth: f64 = 1.00005;
    default_capacity_upgrade: f64 = 1.04;
    default_risk_exponent: f64 = 1.0;
    default_selection_band: f64 = 0.01;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    /// Network file, relative to the scenario file. Absent: the bundled
    /// reference grid.
    #[serde(default)]
    pub network_path: Option<PathBuf>,
    #[serde(default)]
    pub demand_profile_path: Option<PathBuf>,
    #[serde(default)]
    pub plant_profile_path: Option<PathBuf>,
    /// Mean of the synthetic seasonal profile (ignored with a profile file).
    #[serde(default = "default_mean_demand")]
    pub annual_mean_demand_mw: f64,
    #[serde(default = "default_amplitude")]
    pub demand_amplitude: f64,
    #[serde(default = "default_horizon")]
    pub horizon_days: u64,
    #[serde(default)]
    pub n_res_plants: usize,
    /// `P_SG / P_G`.
    #[serde(default)]
    pub penetration: f64,
    /// How many of the plants are wind plants (the rest are solar).
    #[serde(default)]
    pub n_wind: usize,
    /// Kind of each plant, in plant order; overrides `n_wind`.
    #[serde(default)]
    pub plant_kinds: Option<Vec<PlantKind>>,
    #[serde(default)]
    pub placement: Placement,
    #[serde(default)]
    pub winter_doubled: bool,
    #[serde(default = "default_critical_margin")]
    pub critical_margin: f64,
    /// Initial `(P_G − P_D0)/P_D0`; defaults to the critical margin.
    #[serde(default)]
    pub initial_margin: Option<f64>,
    /// Critical margin of the zero-renewable baseline; defaults to `critical_margin`.
    #[serde(default)]
    pub baseline_critical_margin: Option<f64>,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Seed of the synthetic year the outflow plans are computed from.
    #[serde(default)]
    pub planning_seed: u64,
    #[serde(default = "default_p0")]
    pub p0: f64,
    #[serde(default = "default_p1")]
    pub p1: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_blackout_threshold")]
    pub blackout_threshold: f64,
    #[serde(default = "default_overload_threshold")]
    pub overload_threshold: f64,
    #[serde(default = "default_shed_penalty")]
    pub shed_penalty_factor: f64,
    #[serde(default = "default_noise")]
    pub demand_noise: f64,
    #[serde(default = "default_growth")]
    pub demand_growth: f64,
    #[serde(default = "default_capacity_upgrade")]
    pub capacity_upgrade: f64,
    #[serde(default = "default_risk_exponent")]
    pub risk_exponent: f64,
    #[serde(default)]
    pub partial_storage_draw: bool,
    /// Count delivered rather than nominal renewable power in the margin.
    #[serde(default)]
    pub margin_uses_delivered: bool,
    /// Relative performance band for optimal selection.
    #[serde(default = "default_selection_band")]
    pub selection_band: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::format(path, line, e.message().to_string())
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(format!("config serialization: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.penetration) {
            return bad(format!("penetration {} outside [0, 1]", self.penetration));
        }
        if self.penetration > 0.0 && self.n_res_plants == 0 {
            return bad("positive penetration needs at least one plant".into());
        }
        if self.n_wind > self.n_res_plants {
            return bad(format!(
                "n_wind {} exceeds n_res_plants {}",
                self.n_wind, self.n_res_plants
            ));
        }
        if let Some(kinds) = &self.plant_kinds {
            if self.penetration > 0.0 && kinds.len() != self.n_res_plants {
                return bad(format!(
                    "plant_kinds lists {} kinds for {} plants",
                    kinds.len(),
                    self.n_res_plants
                ));
            }
        }
        match &self.placement {
            Placement::Mode(m) if m == "random" => {}
            Placement::Mode(m) => return bad(format!("unknown placement mode {m:?}")),
            Placement::Explicit(buses) if self.penetration > 0.0 && buses.len() != self.n_res_plants => {
                return bad(format!(
                    "explicit placement lists {} buses for {} plants",
                    buses.len(),
                    self.n_res_plants
                ))
            }
            Placement::Explicit(_) => {}
        }
        for (name, v) in [
            ("p0", self.p0),
            ("p1", self.p1),
            ("overload_threshold", self.overload_threshold),
            ("blackout_threshold", self.blackout_threshold),
            ("demand_noise", self.demand_noise),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} outside [0, 1]"));
            }
        }
        for (name, v) in [
            ("mu", self.mu),
            ("demand_growth", self.demand_growth),
            ("capacity_upgrade", self.capacity_upgrade),
        ] {
            if !(v >= 1.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be ≥ 1"));
            }
        }
        if !(self.kappa >= 0.0) {
            return bad("kappa must be non-negative".into());
        }
        if !(self.annual_mean_demand_mw > 0.0) || !(0.0..1.0).contains(&self.demand_amplitude) {
            return bad("demand mean must be positive and amplitude in [0, 1)".into());
        }
        if self.horizon_days == 0 {
            return bad("horizon_days must be positive".into());
        }
        if self.realizations == 0 {
            return bad("realizations must be at least 1".into());
        }
        if !(self.shed_penalty_factor > 1.0) {
            return bad("shed_penalty_factor must exceed 1".into());
        }
        if !(self.risk_exponent > 0.0) || !(0.0..1.0).contains(&self.selection_band) {
            return bad("risk_exponent must be positive and selection_band in [0, 1)".into());
        }
        if self.initial_margin.is_some_and(|m| !(m > -1.0)) {
            return bad("initial_margin must exceed -1".into());
        }
        Ok(())
    }

    fn has_plants(&self) -> bool {
        self.penetration > 0.0 && self.n_res_plants > 0
    }

    /// The zero-renewable reference of this scenario.
    pub fn baseline(&self) -> Self {
        Self {
            name: format!("{}-baseline", self.name),
            n_res_plants: 0,
            penetration: 0.0,
            n_wind: 0,
            plant_kinds: None,
            placement: Placement::default(),
            winter_doubled: false,
            critical_margin: self.baseline_critical_margin.unwrap_or(self.critical_margin),
            initial_margin: self
                .initial_margin
                .or(Some(self.baseline_critical_margin.unwrap_or(self.critical_margin))),
            ..self.clone()
        }
    }

    pub fn cascade_params(&self) -> CascadeParams {
        CascadeParams {
            p0: self.p0,
            p1: self.p1,
            overload_threshold: self.overload_threshold,
            blackout_threshold: self.blackout_threshold,
            dispatch: DispatchOptions {
                shed_penalty_factor: self.shed_penalty_factor,
            },
        }
    }

    pub fn evolution_params(&self) -> EvolutionParams {
        EvolutionParams {
            growth: self.demand_growth,
            demand_noise: self.demand_noise,
            mu: self.mu,
            capacity_upgrade: self.capacity_upgrade,
            critical_margin: self.critical_margin,
        }
    }
}

/// A validated scenario with its inputs loaded.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub network: GridNetwork,
    pub profile: DemandProfile,
    profiles: ProfileOverrides,
    templates: [PlantTemplate; 2],
}

/// Everything a realization needs at day zero.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub state: SystemState,
    /// Bus of each plant.
    pub placement: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationResult {
    pub index: usize,
    pub seed: u64,
    pub placement: Vec<usize>,
    pub kinds: Vec<PlantKind>,
    pub stats: RunStatistics,
    /// Raw risk over the mean baseline raw risk, once known.
    pub normalized_risk: Option<f64>,
}

/// Per-day trace of a realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DayLog {
    pub day: u64,
    pub demand_mw: f64,
    pub res_supplied_mw: f64,
    pub mean_loading: f64,
    pub triggers: usize,
    pub load_shed_mw: f64,
    pub lines_failed: usize,
    pub blackout: bool,
    pub installed_mw: f64,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config = ScenarioConfig::from_toml(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_config(config, base)
    }

    /// Resolves relative input paths against `base_dir`.
    pub fn from_config(config: ScenarioConfig, base_dir: &Path) -> Result<Self> {
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };
        let network = match &config.network_path {
            Some(p) => load_network(resolve(p))?,
            None => balearic_like()?,
        };
        let profile = match &config.demand_profile_path {
            Some(p) => Some(load_demand_profile(resolve(p))?),
            None => None,
        };
        let profiles = match &config.plant_profile_path {
            Some(p) => load_plant_profiles(resolve(p))?,
            None => ProfileOverrides::default(),
        };
        Self::assemble(config, network, profile, profiles)
    }

    /// Scenario over an in-memory network with the synthetic profiles.
    pub fn with_network(config: ScenarioConfig, network: GridNetwork) -> Result<Self> {
        Self::assemble(config, network, None, ProfileOverrides::default())
    }

    fn assemble(
        config: ScenarioConfig,
        network: GridNetwork,
        profile: Option<DemandProfile>,
        profiles: ProfileOverrides,
    ) -> Result<Self> {
        config.validate()?;
        network.validate()?;
        if network.generators.iter().any(|g| g.kind.is_renewable()) {
            return Err(Error::Config(
                "scenario networks must hold conventional generators only; plants are added by the scenario".into(),
            ));
        }
        if network.generators.is_empty() {
            return Err(Error::Config("network has no generators".into()));
        }
        if let Placement::Explicit(buses) = &config.placement {
            if let Some(b) = buses.iter().find(|&&b| b >= network.num_buses()) {
                return Err(Error::Config(format!("placement bus {b} does not exist")));
            }
        }
        if matches!(config.placement, Placement::Mode(_))
            && config.has_plants()
            && config.n_res_plants > network.num_buses()
        {
            return Err(Error::Config(format!(
                "{} plants cannot be placed on distinct buses of a {}-bus network",
                config.n_res_plants,
                network.num_buses()
            )));
        }
        let profile = match profile {
            Some(p) => p,
            None => DemandProfile::seasonal(config.annual_mean_demand_mw, config.demand_amplitude)?,
        };
        let template = |kind| {
            let shape = profiles
                .get(kind)
                .copied()
                .unwrap_or_else(|| PlantProfile::default_for(kind));
            PlantTemplate::calibrate(kind, &shape, config.planning_seed)
        };
        let templates = [template(PlantKind::Solar)?, template(PlantKind::Wind)?];
        Ok(Self {
            config,
            network,
            profile,
            profiles,
            templates,
        })
    }

    /// The same inputs under a different configuration.
    pub fn reconfigured(&self, config: ScenarioConfig) -> Result<Self> {
        let profile = Some(self.profile.clone());
        let mut s = Self::assemble(config, self.network.clone(), profile, self.profiles.clone())?;
        if s.config.planning_seed == self.config.planning_seed {
            s.templates = self.templates.clone();
        }
        Ok(s)
    }

    pub fn baseline(&self) -> Result<Self> {
        self.reconfigured(self.config.baseline())
    }

    pub fn template(&self, kind: PlantKind) -> &PlantTemplate {
        &self.templates[kind as usize]
    }

    /// Initial network, plants and state for one realization.
    pub fn build(&self, seed: u64) -> Result<Simulation> {
        let cfg = &self.config;
        let p_d0 = self.profile.annual_mean();
        let margin = cfg.initial_margin.unwrap_or(cfg.critical_margin);
        let p_g = (1.0 + margin) * p_d0;
        let penetration = if cfg.has_plants() { cfg.penetration } else { 0.0 };

        let mut network = self.network.clone();
        let conventional: f64 = network.total_capacity();
        if !(conventional > 0.0) {
            return Err(Error::Config("network has no conventional capacity".into()));
        }
        let factor = (1.0 - penetration) * p_g / conventional;
        for g in &mut network.generators {
            g.capacity *= factor;
        }

        let mut placement_rng = stream(seed, Stream::Placement);
        let n = if cfg.has_plants() { cfg.n_res_plants } else { 0 };
        let buses: Vec<usize> = match &cfg.placement {
            _ if n == 0 => Vec::new(),
            Placement::Explicit(b) => b.clone(),
            Placement::Mode(_) => sample(&mut placement_rng, network.num_buses(), n).into_vec(),
        };
        let mut kinds = vec![PlantKind::Solar; n];
        if let Some(explicit) = cfg.plant_kinds.as_ref().filter(|_| n > 0) {
            kinds.clone_from(explicit);
        } else if cfg.n_wind > 0 && n > 0 {
            for k in sample(&mut placement_rng, n, cfg.n_wind).into_vec() {
                kinds[k] = PlantKind::Wind;
            }
        }

        let nominal = if n > 0 { penetration * p_g / n as f64 } else { 0.0 };
        let mut plants = Vec::with_capacity(n);
        let mut plant_generators = Vec::with_capacity(n);
        let mut per_kind = [0usize; 2];
        for (k, (&bus, &kind)) in buses.iter().zip(&kinds).enumerate() {
            let set = CorrelationSet::alternating(per_kind[kind as usize]);
            per_kind[kind as usize] += 1;
            let mut plant =
                ResPlant::from_template(k, bus, self.template(kind), nominal, set, cfg.winter_doubled, cfg.kappa);
            plant.partial_draw = cfg.partial_storage_draw;
            let g = network.generators.len();
            network.generators.push(Generator {
                id: g,
                bus,
                kind: match kind {
                    PlantKind::Solar => GeneratorKind::Solar,
                    PlantKind::Wind => GeneratorKind::Wind,
                },
                capacity: nominal,
                marginal_cost: 0.0,
            });
            plants.push(plant);
            plant_generators.push(g);
        }
        network.validate()?;
        Ok(Simulation {
            state: SystemState::new(network, plants, plant_generators)?,
            placement: buses,
        })
    }

    pub fn run_realization(&self, index: usize) -> Result<RealizationResult> {
        self.run_realization_logged(index, |_| {})
    }

    /// Runs realization `index`, calling `log` once per simulated day.
    pub fn run_realization_logged(&self, index: usize, mut log: impl FnMut(&DayLog)) -> Result<RealizationResult> {
        let cfg = &self.config;
        let seed = realization_seed(cfg.master_seed, index as u64);
        let Simulation { mut state, placement } = self.build(seed)?;
        let kinds: Vec<PlantKind> = state.plants.iter().map(|p| p.kind).collect();
        let cascade = cfg.cascade_params();
        let evolution = cfg.evolution_params();
        let mut demand_rng = stream(seed, Stream::Demand);
        let mut weather_rng = stream(seed, Stream::Weather);
        let mut trigger_rng = stream(seed, Stream::Triggers);
        let mut cascade_rng = stream(seed, Stream::Cascade);

        let model = DcModel::new(&state.network, cascade.dispatch)?;
        let fractions = state.network.demand_fractions();
        let n_conv = state.network.generators.len() - state.plants.len();
        let mut available = vec![0.0; state.network.generators.len()];
        let mut acc = RunAccumulator::default();
        let mut year_margin_sum = 0.0;

        for _ in 0..cfg.horizon_days {
            let day = state.day;
            let doy = (day % 365) as usize;
            let month = month_of_day(doy);
            let p_d = state.advance_day(&self.profile, &evolution, &mut demand_rng);
            let demand = nodal_demand(&fractions, p_d)?;

            let draws = WeatherDraws::sample(&mut weather_rng);
            for (a, g) in available.iter_mut().zip(&state.network.generators).take(n_conv) {
                *a = g.capacity;
            }
            let mut res_delivered = 0.0;
            for (plant, &g) in state.plants.iter_mut().zip(&state.plant_generators) {
                let p_in = sample_production(plant, doy, &draws);
                let step = plant.daily_step(p_in, month);
                available[g] = step.delivered;
                res_delivered += step.delivered;
            }

            let base = model.dispatch(&state.network, &demand, &available)?;
            let supplied: f64 = state.plant_generators.iter().map(|&g| base.generation[g]).sum();
            let mean_loading = base.mean_loading();
            acc.add_day(doy, supplied / base.total_demand, mean_loading);

            let triggers = trigger_outages(&state.network, cascade.p0, &mut trigger_rng);
            let result = run_cascade_from(
                &state.network,
                &demand,
                &available,
                &triggers,
                &cascade,
                Some(&base),
                &mut cascade_rng,
            )?;
            if let Some(record) = BlackoutRecord::from_cascade(day, &result) {
                acc.add_record(record);
                state.upgrade_after_blackout(&result, evolution.mu)?;
            }

            let installed = if cfg.margin_uses_delivered {
                state.conventional_capacity() + res_delivered
            } else {
                state.installed_capacity()
            };
            state.record_margin(installed, p_d);
            log(&DayLog {
                day,
                demand_mw: p_d,
                res_supplied_mw: supplied,
                mean_loading,
                triggers: triggers.len(),
                load_shed_mw: result.load_shed,
                lines_failed: result.failed_lines.len(),
                blackout: result.is_blackout,
                installed_mw: installed,
            });
            year_margin_sum += *state.margin_history.last().expect("margin just recorded");
            if state.day % 365 == 0 {
                acc.annual_margins.push(year_margin_sum / 365.0);
                year_margin_sum = 0.0;
                state.annual_capacity_check(&evolution);
            }
        }

        Ok(RealizationResult {
            index,
            seed,
            placement,
            kinds,
            stats: acc.finish(cfg.risk_exponent)?,
            normalized_risk: None,
        })
    }

    /// All realizations, in index order. Runs on the rayon pool when
    /// `parallel`; results are identical either way.
    pub fn run_all(&self, parallel: bool) -> Result<Vec<RealizationResult>> {
        let n = self.config.realizations;
        if parallel {
            (0..n).into_par_iter().map(|i| self.run_realization(i)).collect()
        } else {
            (0..n).map(|i| self.run_realization(i)).collect()
        }
    }

    pub fn monte_carlo(&self) -> Result<Vec<RealizationResult>> {
        self.run_all(true)
    }

    /// Monte Carlo of this scenario normalized against a baseline study.
    pub fn study_against(&self, baseline: &[RealizationResult]) -> Result<Vec<RealizationResult>> {
        let reference = mean_raw_risk(baseline)?;
        let mut results = self.monte_carlo()?;
        normalize_all(&mut results, reference)?;
        Ok(results)
    }
}

pub fn mean_raw_risk(results: &[RealizationResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::Contract("no results".into()));
    }
    Ok(results.iter().map(|r| r.stats.risk_raw).sum::<f64>() / results.len() as f64)
}

pub fn normalize_all(results: &mut [RealizationResult], baseline_raw: f64) -> Result<()> {
    for r in results {
        r.normalized_risk = Some(normalize_risk(r.stats.risk_raw, baseline_raw)?);
    }
    Ok(())
}

/// Among results within `band` (relative) of the best performance, the one
/// with the lowest risk; ties go to the lowest seed.
pub fn select_optimal(results: &[RealizationResult], band: f64) -> Result<&RealizationResult> {
    let best = results
        .iter()
        .map(|r| r.stats.performance)
        .fold(f64::NEG_INFINITY, f64::max);
    let risk = |r: &RealizationResult| r.normalized_risk.unwrap_or(r.stats.risk_raw);
    results
        .iter()
        .filter(|r| r.stats.performance >= best * (1.0 - band))
        .min_by(|a, b| risk(a).total_cmp(&risk(b)).then(a.seed.cmp(&b.seed)))
        .ok_or_else(|| Error::Contract("cannot select from an empty result set".into()))
}

/// Parameter grid over a base scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Base scenario file, relative to the sweep file.
    pub scenario: PathBuf,
    #[serde(default)]
    pub penetrations: Vec<f64>,
    #[serde(default)]
    pub n_plants: Vec<usize>,
    #[serde(default)]
    pub n_wind: Vec<usize>,
    /// Fix each `n`'s placement to the optimal one from a random-placement
    /// study at `reference_penetration`.
    #[serde(default)]
    pub freeze_optimal_placement: bool,
    #[serde(default)]
    pub reference_penetration: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub penetration: f64,
    pub n_plants: usize,
    pub n_wind: usize,
    pub realizations: usize,
    pub performance_mean: f64,
    pub performance_std: f64,
    pub stress_mean: f64,
    pub risk_raw_mean: f64,
    /// Mean raw risk over mean baseline raw risk.
    pub risk_normalized: f64,
    pub risk_normalized_median: f64,
    pub shortfall_share: f64,
    pub winter_coverage_mean: f64,
    pub summer_coverage_mean: f64,
}

pub const WINTER_MONTHS: [usize; 6] = [10, 11, 0, 1, 2, 3];
pub const SUMMER_MONTHS: [usize; 6] = [4, 5, 6, 7, 8, 9];

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Aggregate row for one grid point.
pub fn aggregate(config: &ScenarioConfig, results: &[RealizationResult], baseline_raw: f64) -> Result<SweepRow> {
    let perf: Vec<f64> = results.iter().map(|r| r.stats.performance).collect();
    let (performance_mean, performance_std) = mean_std(&perf);
    let stress: Vec<f64> = results.iter().map(|r| r.stats.stress).collect();
    let raw = mean_raw_risk(results)?;
    let normalized: Vec<f64> = results
        .iter()
        .map(|r| normalize_risk(r.stats.risk_raw, baseline_raw))
        .collect::<Result<_>>()?;
    let (blackouts, shortfalls) = results.iter().fold((0usize, 0usize), |(b, s), r| {
        (b + r.stats.records.len(), s + r.stats.shortfall_blackouts)
    });
    let season = |months: [usize; 6]| {
        let mut h = crate::metrics::CoverageHistogram::default();
        for r in results {
            h.merge(&crate::metrics::pooled(&r.stats.monthly_coverage, months));
        }
        h.mean()
    };
    Ok(SweepRow {
        penetration: if config.has_plants() { config.penetration } else { 0.0 },
        n_plants: if config.has_plants() { config.n_res_plants } else { 0 },
        n_wind: if config.has_plants() { config.n_wind } else { 0 },
        realizations: results.len(),
        performance_mean,
        performance_std,
        stress_mean: mean_std(&stress).0,
        risk_raw_mean: raw,
        risk_normalized: normalize_risk(raw, baseline_raw)?,
        risk_normalized_median: median(&normalized),
        shortfall_share: if blackouts == 0 {
            0.0
        } else {
            shortfalls as f64 / blackouts as f64
        },
        winter_coverage_mean: season(WINTER_MONTHS),
        summer_coverage_mean: season(SUMMER_MONTHS),
    })
}

impl SweepConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Scenario)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let sweep: SweepConfig = toml::from_str(&text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::format(path, line, e.message().to_string())
        })?;
        let base_dir = path.parent().unwrap_or(Path::new("."));
        let scenario_path = if sweep.scenario.is_absolute() {
            sweep.scenario.clone()
        } else {
            base_dir.join(&sweep.scenario)
        };
        let scenario = Scenario::load(scenario_path)?;
        Ok((sweep, scenario))
    }

    /// Grid points as (penetration, n, n_wind); empty axes take the base value.
    pub fn points(&self, base: &ScenarioConfig) -> Vec<(f64, usize, usize)> {
        let pens = if self.penetrations.is_empty() {
            vec![base.penetration]
        } else {
            self.penetrations.clone()
        };
        let ns = if self.n_plants.is_empty() {
            vec![base.n_res_plants]
        } else {
            self.n_plants.clone()
        };
        let ws = if self.n_wind.is_empty() {
            vec![base.n_wind]
        } else {
            self.n_wind.clone()
        };
        let mut out = Vec::new();
        for &p in &pens {
            for &n in &ns {
                for &w in &ws {
                    out.push((p, n, w));
                }
            }
        }
        out
    }
}

/// Runs every grid point against one shared baseline.
pub fn sweep(sweep: &SweepConfig, scenario: &Scenario) -> Result<Vec<SweepRow>> {
    let points = sweep.points(&scenario.config);
    if points.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let baseline = scenario.baseline()?.monte_carlo()?;
    let baseline_raw = mean_raw_risk(&baseline)?;

    let mut frozen: Vec<(usize, usize, Vec<usize>)> = Vec::new();
    let mut rows = Vec::with_capacity(points.len());
    for (p, n, w) in points {
        let mut cfg = scenario.config.clone();
        cfg.penetration = p;
        cfg.n_res_plants = n;
        cfg.n_wind = w;
        if sweep.freeze_optimal_placement && p > 0.0 && n > 0 {
            let placement = match frozen.iter().find(|(fn_, fw, _)| *fn_ == n && *fw == w) {
                Some((_, _, b)) => b.clone(),
                None => {
                    let mut reference = cfg.clone();
                    reference.penetration = sweep.reference_penetration.unwrap_or(scenario.config.penetration);
                    reference.placement = Placement::default();
                    let results = scenario.reconfigured(reference.clone())?.study_against(&baseline)?;
                    let best = select_optimal(&results, reference.selection_band)?.placement.clone();
                    frozen.push((n, w, best.clone()));
                    best
                }
            };
            cfg.placement = Placement::Explicit(placement);
        }
        let results = if cfg.has_plants() {
            scenario.reconfigured(cfg.clone())?.monte_carlo()?
        } else {
            baseline.clone()
        };
        rows.push(aggregate(&cfg, &results, baseline_raw)?);
    }
    Ok(rows)
}

//! Slow dynamics: demand growth with daily noise, line upgrades after
//! blackouts and yearly generation upgrades against the critical margin.

use rand::Rng;

use crate::cascade::CascadeResult;
use crate::error::{Error, Result};
use crate::grid::{DemandProfile, GeneratorKind, GridNetwork};
use crate::res::ResPlant;

/// Absorbs rounding in the yearly mean so a margin sitting exactly at the
/// critical value fires.
const MARGIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionParams {
    /// Daily demand growth factor.
    pub growth: f64,
    /// Half-width δ of the uniform daily demand factor on [1 − δ, 1 + δ].
    pub demand_noise: f64,
    /// Line limit factor applied after a blackout.
    pub mu: f64,
    /// Generation factor applied when the yearly margin is too low.
    pub capacity_upgrade: f64,
    /// `ΔP_G^c`.
    pub critical_margin: f64,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        Self {
            growth: 1.00005,
            demand_noise: 0.05,
            mu: 1.04,
            capacity_upgrade: 1.04,
            critical_margin: 0.4,
        }
    }
}

/// Evolving state of one realization. The network owns the current line
/// limits and conventional capacities; renewable generators in the network
/// mirror `plants` in order.
#[derive(Debug, Clone)]
pub struct SystemState {
    pub day: u64,
    pub demand_scale: f64,
    pub network: GridNetwork,
    pub plants: Vec<ResPlant>,
    /// Generator id of each plant.
    pub plant_generators: Vec<usize>,
    /// Daily `ΔP_G` since the last capacity check.
    pub margin_history: Vec<f64>,
}

impl SystemState {
    pub fn new(network: GridNetwork, plants: Vec<ResPlant>, plant_generators: Vec<usize>) -> Result<Self> {
        if plants.len() != plant_generators.len() {
            return Err(Error::Contract("one generator id per plant is required".into()));
        }
        for &g in &plant_generators {
            match network.generators.get(g) {
                Some(gen) if gen.kind.is_renewable() => {}
                _ => {
                    return Err(Error::Contract(format!(
                        "generator {g} is not a renewable unit of the network"
                    )))
                }
            }
        }
        Ok(Self {
            day: 0,
            demand_scale: 1.0,
            network,
            plants,
            plant_generators,
            margin_history: Vec::with_capacity(365),
        })
    }

    pub fn line_limits(&self) -> Vec<f64> {
        self.network.lines.iter().map(|l| l.flow_limit).collect()
    }

    pub fn conventional_capacity(&self) -> f64 {
        self.network
            .generators
            .iter()
            .filter(|g| g.kind == GeneratorKind::Conventional)
            .map(|g| g.capacity)
            .sum()
    }

    pub fn res_nominal(&self) -> f64 {
        self.plants.iter().map(|p| p.nominal_power).sum()
    }

    /// `P_G`: conventional capacity plus renewable nominal power.
    pub fn installed_capacity(&self) -> f64 {
        self.conventional_capacity() + self.res_nominal()
    }

    /// Grows demand by one day and returns the day's system peak.
    pub fn advance_day<R: Rng + ?Sized>(
        &mut self,
        profile: &DemandProfile,
        params: &EvolutionParams,
        rng: &mut R,
    ) -> f64 {
        self.demand_scale *= params.growth;
        let u: f64 = rng.random();
        let gamma = 1.0 + params.demand_noise * (2.0 * u - 1.0);
        let peak = profile.peak(self.day) * self.demand_scale * gamma;
        self.day += 1;
        peak
    }

    /// Raises the limit of every failed or overloaded line by `μ`.
    pub fn upgrade_after_blackout(&mut self, result: &CascadeResult, mu: f64) -> Result<()> {
        if !result.is_blackout {
            return Err(Error::Contract("line upgrades apply only after a blackout".into()));
        }
        for &l in result.failed_lines.union(&result.overloaded_lines) {
            self.network.lines[l].flow_limit *= mu;
        }
        Ok(())
    }

    pub fn record_margin(&mut self, generation_capacity: f64, demand: f64) {
        self.margin_history.push((generation_capacity - demand) / demand);
    }

    /// Yearly check: upgrades all generation when the mean margin is at or
    /// below the critical value. Returns whether it fired.
    pub fn annual_capacity_check(&mut self, params: &EvolutionParams) -> bool {
        let fire = !self.margin_history.is_empty() && {
            let mean = self.margin_history.iter().sum::<f64>() / self.margin_history.len() as f64;
            mean <= params.critical_margin + MARGIN_TOL
        };
        self.margin_history.clear();
        if fire {
            let f = params.capacity_upgrade;
            for g in &mut self.network.generators {
                if g.kind == GeneratorKind::Conventional {
                    g.capacity *= f;
                }
            }
            for (plant, &g) in self.plants.iter_mut().zip(&self.plant_generators) {
                plant.scale(f);
                self.network.generators[g].capacity = plant.nominal_power;
            }
        }
        fire
    }
}

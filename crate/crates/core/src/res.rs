//! Renewable plants: synthetic daily production, monthly outflow planning
//! and daily storage bookkeeping.
//!
//! A plant aims to deliver a constant power each month. The monthly levels
//! come from [`plan_outflow`], which maximises delivered energy against a
//! planning year of production and then minimises the storage needed to
//! back it. In operation the plant keeps `κ` days of nominal output in
//! storage, dumps surplus once the store is full and falls back to raw
//! production when the store cannot cover a deficit.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::LinearProgram;

/// Storage capacity in days of nominal output.
pub const KAPPA: f64 = 3.4;

pub const MONTH_LENGTHS: [usize; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

/// Calendar month (0 = January) of a day of the year (0..365).
pub fn month_of_day(day_of_year: usize) -> usize {
    let mut d = day_of_year % 365;
    for (m, &len) in MONTH_LENGTHS.iter().enumerate() {
        if d < len {
            return m;
        }
        d -= len;
    }
    unreachable!()
}

/// November through April.
pub fn is_winter(month: usize) -> bool {
    matches!(month, 10 | 11 | 0..=3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantKind {
    Solar,
    Wind,
}

impl PlantKind {
    fn index(self) -> usize {
        match self {
            PlantKind::Solar => 0,
            PlantKind::Wind => 1,
        }
    }
}

/// Plants in the same set share one daily weather draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CorrelationSet {
    A,
    B,
}

impl CorrelationSet {
    /// Alternating assignment in placement order.
    pub fn alternating(index: usize) -> Self {
        if index.is_multiple_of(2) {
            CorrelationSet::A
        } else {
            CorrelationSet::B
        }
    }

    fn index(self) -> usize {
        match self {
            CorrelationSet::A => 0,
            CorrelationSet::B => 1,
        }
    }
}

/// Monthly mean production and daily Gaussian spread, both in units of the
/// plant's nominal power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantProfile {
    pub monthly_means: [f64; 12],
    pub daily_sigma: [f64; 12],
}

fn month_midpoint(m: usize) -> f64 {
    let start: usize = MONTH_LENGTHS[..m].iter().sum();
    start as f64 + MONTH_LENGTHS[m] as f64 / 2.0
}

impl PlantProfile {
    fn from_shape(shape: impl Fn(f64) -> f64, sigma_factor: f64) -> Self {
        let mut means = [0.0; 12];
        for (m, v) in means.iter_mut().enumerate() {
            *v = shape(month_midpoint(m));
        }
        let annual: f64 = means.iter().zip(MONTH_LENGTHS).map(|(v, n)| v * n as f64).sum::<f64>() / 365.0;
        let monthly_means = means.map(|v| v / annual);
        Self {
            monthly_means,
            daily_sigma: monthly_means.map(|v| sigma_factor * v),
        }
    }

    /// Synthetic solar year: low in winter (≈0.45×), high in summer (≈1.5×).
    pub fn default_solar() -> Self {
        Self::from_shape(
            |day| 0.975 + 0.525 * (2.0 * std::f64::consts::PI * (day - 172.0) / 365.0).cos(),
            0.30,
        )
    }

    /// Synthetic wind year: flatter, slightly stronger in winter, twice the
    /// relative daily spread of solar.
    pub fn default_wind() -> Self {
        Self::from_shape(
            |day| 1.0 + 0.2 * (2.0 * std::f64::consts::PI * (day - 15.0) / 365.0).cos(),
            0.60,
        )
    }

    pub fn default_for(kind: PlantKind) -> Self {
        match kind {
            PlantKind::Solar => Self::default_solar(),
            PlantKind::Wind => Self::default_wind(),
        }
    }

    /// One year of normalised daily production, independent draws per day.
    pub fn sample_year<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..365)
            .map(|d| {
                let m = month_of_day(d);
                let z: f64 = rng.sample(StandardNormal);
                (self.monthly_means[m] + self.daily_sigma[m] * z).max(0.0)
            })
            .collect()
    }

    fn scaled(&self, factor: f64) -> Self {
        Self {
            monthly_means: self.monthly_means.map(|v| v * factor),
            daily_sigma: self.daily_sigma.map(|v| v * factor),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutflowPlan {
    /// Planned constant outflow per month.
    pub monthly_levels: Vec<f64>,
    /// Minimised `R_max`, in power × days.
    pub required_storage: f64,
    /// Energy delivered over the planning period, power × days.
    pub delivered_energy: f64,
}

impl OutflowPlan {
    /// Storage content `R(t)` at the end of each day.
    pub fn storage_trajectory(&self, p_in: &[f64], month_lengths: &[usize]) -> Vec<f64> {
        storage_trajectory(&self.monthly_levels, p_in, month_lengths)
    }

    /// Time-averaged outflow, the plant's nominal power.
    pub fn mean_outflow(&self, month_lengths: &[usize]) -> f64 {
        let days: usize = month_lengths.iter().sum();
        if days == 0 {
            0.0
        } else {
            self.delivered_energy / days as f64
        }
    }

    /// Required storage in days of mean outflow.
    pub fn storage_days(&self, month_lengths: &[usize]) -> f64 {
        let mean = self.mean_outflow(month_lengths);
        if mean > 0.0 {
            self.required_storage / mean
        } else {
            0.0
        }
    }
}

fn storage_trajectory(levels: &[f64], p_in: &[f64], month_lengths: &[usize]) -> Vec<f64> {
    let mut r = 0.0;
    let mut out = Vec::with_capacity(p_in.len());
    let mut t = 0;
    for (m, &len) in month_lengths.iter().enumerate() {
        for _ in 0..len {
            r += p_in[t] - levels[m];
            out.push(r);
            t += 1;
        }
    }
    out
}

/// Plans monthly-constant outflow levels for a production series.
///
/// Stage one maximises delivered energy subject to `R(t) ≥ 0` with
/// `R(0) = 0`; stage two keeps that energy and minimises `max R(t)`.
pub fn plan_outflow(p_in: &[f64], month_lengths: &[usize]) -> Result<OutflowPlan> {
    let days: usize = month_lengths.iter().sum();
    if days != p_in.len() {
        return Err(Error::Contract(format!(
            "month lengths cover {days} days but the series has {}",
            p_in.len()
        )));
    }
    if month_lengths.contains(&0) {
        return Err(Error::Contract("every month needs at least one day".into()));
    }
    if p_in.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::Contract("production must be finite and non-negative".into()));
    }
    let months = month_lengths.len();
    let total_in: f64 = p_in.iter().sum();
    if total_in == 0.0 {
        return Ok(OutflowPlan {
            monthly_levels: vec![0.0; months],
            required_storage: 0.0,
            delivered_energy: 0.0,
        });
    }

    let mut cum_in = Vec::with_capacity(days);
    let mut acc = 0.0;
    for v in p_in {
        acc += v;
        cum_in.push(acc);
    }
    // Cumulative outflow at the end of day t as coefficients on the levels.
    let cum_out_row = |t: usize| -> Vec<(usize, f64)> {
        let mut row = Vec::new();
        let mut start = 0;
        for (m, &len) in month_lengths.iter().enumerate() {
            if start > t {
                break;
            }
            let covered = (t + 1 - start).min(len);
            row.push((m, covered as f64));
            start += len;
        }
        row
    };
    let energy_row: Vec<(usize, f64)> = month_lengths.iter().enumerate().map(|(m, &n)| (m, n as f64)).collect();

    let scale = cum_in[days - 1].max(1.0);
    let tol = 1e-9 * scale;
    let month_ends: Vec<usize> = month_lengths
        .iter()
        .scan(0, |acc, &n| {
            *acc += n;
            Some(*acc - 1)
        })
        .collect();

    // Stage one, adding R(t) ≥ 0 rows for violated days until none remain.
    let mut low: Vec<usize> = month_ends.clone();
    let best_energy = loop {
        let mut lp = LinearProgram::new();
        for &n in month_lengths {
            lp.add_var(-(n as f64), 0.0, f64::INFINITY);
        }
        for &t in &low {
            lp.add_le(cum_out_row(t), cum_in[t]);
        }
        let sol = lp
            .solve()
            .map_err(|e| Error::Internal(format!("outflow stage 1: {e}")))?;
        let r = storage_trajectory(&sol.x[..months], p_in, month_lengths);
        if !add_violations(&r, &mut low, month_lengths, |v| v < -tol) {
            break -sol.objective;
        }
    };

    // Stage two: R(t) ≤ z with z = z_max − y, y ∈ [0, z_max].
    let z_max = cum_in.iter().copied().fold(0.0, f64::max);
    let mut high: Vec<usize> = month_ends.clone();
    let slack = 1e-10 * best_energy.abs().max(1.0);
    let stage2 = loop {
        let mut lp = LinearProgram::new();
        for _ in month_lengths {
            lp.add_var(0.0, 0.0, f64::INFINITY);
        }
        let y = lp.add_var(-1.0, 0.0, z_max);
        for &t in &low {
            lp.add_le(cum_out_row(t), cum_in[t]);
        }
        for &t in &high {
            let mut row = cum_out_row(t);
            row.push((y, -1.0));
            lp.add_ge(row, cum_in[t] - z_max);
        }
        lp.add_ge(energy_row.clone(), best_energy - slack);
        let sol = lp
            .solve()
            .map_err(|e| Error::Internal(format!("outflow stage 2: {e}")))?;
        let z = z_max - sol.x[y];
        let r = storage_trajectory(&sol.x[..months], p_in, month_lengths);
        let more_low = add_violations(&r, &mut low, month_lengths, |v| v < -tol);
        let more_high = add_violations(&r, &mut high, month_lengths, |v| v > z + tol);
        if !more_low && !more_high {
            break sol;
        }
    };

    let mut levels: Vec<f64> = stage2.x[..months].iter().map(|v| v.max(0.0)).collect();
    repair_feasibility(&mut levels, p_in, month_lengths);

    let trajectory = storage_trajectory(&levels, p_in, month_lengths);
    let required_storage = trajectory.iter().copied().fold(0.0, f64::max);
    let delivered_energy = levels.iter().zip(month_lengths).map(|(l, &n)| l * n as f64).sum();
    Ok(OutflowPlan {
        monthly_levels: levels,
        required_storage,
        delivered_energy,
    })
}

/// Adds, per month, the most violated day not yet in `active`.
fn add_violations(r: &[f64], active: &mut Vec<usize>, month_lengths: &[usize], violated: impl Fn(f64) -> bool) -> bool {
    let mut added = false;
    let mut start = 0;
    for &len in month_lengths {
        let worst = (start..start + len)
            .filter(|&t| violated(r[t]) && !active.contains(&t))
            .max_by(|&a, &b| {
                let (va, vb) = (r[a].abs(), r[b].abs());
                va.total_cmp(&vb).then(b.cmp(&a))
            });
        if let Some(t) = worst {
            active.push(t);
            added = true;
        }
        start += len;
    }
    added
}

/// Lowers levels until the simulated `R(t)` is non-negative in floating point.
fn repair_feasibility(levels: &mut [f64], p_in: &[f64], month_lengths: &[usize]) {
    let mut start = 0;
    let mut r0 = 0.0;
    for (m, &len) in month_lengths.iter().enumerate() {
        loop {
            let mut r = r0;
            let mut worst: f64 = 0.0;
            for (k, t) in (start..start + len).enumerate() {
                r += p_in[t] - levels[m];
                if r < 0.0 {
                    worst = worst.max(-r / (k + 1) as f64);
                }
            }
            if worst == 0.0 {
                r0 = r;
                break;
            }
            let step = worst.max(4.0 * f64::EPSILON * levels[m]);
            levels[m] = (levels[m] - step).max(0.0);
        }
        start += len;
    }
}

/// Standard normal draws for one day, one per (kind, correlation set).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WeatherDraws {
    values: [[f64; 2]; 2],
}

impl WeatherDraws {
    pub fn new(solar: [f64; 2], wind: [f64; 2]) -> Self {
        Self { values: [solar, wind] }
    }

    /// Draws in the fixed order solar A, solar B, wind A, wind B.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut values = [[0.0; 2]; 2];
        for kind in &mut values {
            for v in kind.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
        }
        Self { values }
    }

    pub fn get(&self, kind: PlantKind, set: CorrelationSet) -> f64 {
        self.values[kind.index()][set.index()]
    }
}

/// A plant's normalised behaviour: production profile and outflow plan in
/// units of nominal power.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantTemplate {
    pub kind: PlantKind,
    pub profile: PlantProfile,
    pub plan_levels: [f64; 12],
    /// Storage the planner needed for the planning year, in days.
    pub planning_storage_days: f64,
}

impl PlantTemplate {
    /// Plans against one sampled year of `shape` and rescales everything so
    /// the annual mean outflow is exactly one.
    pub fn calibrate(kind: PlantKind, shape: &PlantProfile, planning_seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(planning_seed);
        let year = shape.sample_year(&mut rng);
        let plan = plan_outflow(&year, &MONTH_LENGTHS)?;
        let nominal = plan.mean_outflow(&MONTH_LENGTHS);
        if !(nominal > 0.0) {
            return Err(Error::Config(format!(
                "{kind:?} profile delivers no energy in the planning year"
            )));
        }
        let mut plan_levels = [0.0; 12];
        for (dst, src) in plan_levels.iter_mut().zip(&plan.monthly_levels) {
            *dst = src / nominal;
        }
        Ok(Self {
            kind,
            profile: shape.scaled(1.0 / nominal),
            plan_levels,
            planning_storage_days: plan.storage_days(&MONTH_LENGTHS),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DailyStep {
    /// Power delivered to the grid, `P_g`.
    pub delivered: f64,
    /// Energy that did not fit in the store.
    pub dumped: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResPlant {
    pub id: usize,
    pub bus: usize,
    pub kind: PlantKind,
    /// Annual mean planned outflow; with winter doubling, the summer-capacity figure.
    pub nominal_power: f64,
    pub storage_capacity: f64,
    pub storage_level: f64,
    pub correlation_set: CorrelationSet,
    pub monthly_means: [f64; 12],
    pub daily_sigma: [f64; 12],
    /// Planned outflow per month in MW (before winter doubling).
    pub outflow_plan: [f64; 12],
    pub winter_doubled: bool,
    pub kappa: f64,
    /// Draw whatever is left in storage when it cannot cover the full deficit.
    pub partial_draw: bool,
}

impl ResPlant {
    pub fn from_template(
        id: usize,
        bus: usize,
        template: &PlantTemplate,
        nominal_power: f64,
        correlation_set: CorrelationSet,
        winter_doubled: bool,
        kappa: f64,
    ) -> Self {
        Self {
            id,
            bus,
            kind: template.kind,
            nominal_power,
            storage_capacity: kappa * nominal_power,
            storage_level: 0.0,
            correlation_set,
            monthly_means: template.profile.monthly_means,
            daily_sigma: template.profile.daily_sigma,
            outflow_plan: template.plan_levels.map(|v| v * nominal_power),
            winter_doubled,
            kappa,
            partial_draw: false,
        }
    }

    fn winter_factor(&self, month: usize) -> f64 {
        if self.winter_doubled && is_winter(month) {
            2.0
        } else {
            1.0
        }
    }

    /// `P_out` for the month, doubled in winter when redundancy is on.
    pub fn planned_outflow(&self, month: usize) -> f64 {
        self.outflow_plan[month] * self.winter_factor(month)
    }

    /// Installed capacity as seen in `month` (doubled in winter when redundant).
    pub fn installed_in(&self, month: usize) -> f64 {
        self.nominal_power * self.winter_factor(month)
    }

    /// Advances storage by one day and returns the delivered power.
    pub fn daily_step(&mut self, p_in: f64, month: usize) -> DailyStep {
        let p_out = self.planned_outflow(month);
        if p_in >= p_out {
            let room = self.storage_capacity - self.storage_level;
            let surplus = p_in - p_out;
            let stored = surplus.min(room);
            self.storage_level += stored;
            DailyStep {
                delivered: p_out,
                dumped: surplus - stored,
            }
        } else {
            let deficit = p_out - p_in;
            if self.storage_level >= deficit {
                self.storage_level -= deficit;
                DailyStep {
                    delivered: p_out,
                    dumped: 0.0,
                }
            } else if self.partial_draw {
                let drawn = self.storage_level;
                self.storage_level = 0.0;
                DailyStep {
                    delivered: p_in + drawn,
                    dumped: 0.0,
                }
            } else {
                DailyStep {
                    delivered: p_in,
                    dumped: 0.0,
                }
            }
        }
    }

    /// Scales the whole plant (nominal power, storage, plan) by `factor`.
    pub fn scale(&mut self, factor: f64) {
        self.nominal_power *= factor;
        self.storage_capacity = self.kappa * self.nominal_power;
        self.outflow_plan = self.outflow_plan.map(|v| v * factor);
    }
}

/// Production `P_in` for one plant on one day.
pub fn sample_production(plant: &ResPlant, day_of_year: usize, draws: &WeatherDraws) -> f64 {
    let m = month_of_day(day_of_year);
    let z = draws.get(plant.kind, plant.correlation_set);
    let normalised = (plant.monthly_means[m] + plant.daily_sigma[m] * z).max(0.0);
    plant.nominal_power * normalised * plant.winter_factor(m)
}

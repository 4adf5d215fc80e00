//! DC power-flow dispatch with load shedding.
//!
//! Each connected component of the in-service network is dispatched on its
//! own: minimise `Σ cost·generation + W·Σ shed` subject to power balance, the
//! DC flow equations, hard line limits and generator/shed bounds.
//!
//! Flows are expressed through the component's reduced susceptance matrix,
//! so the line rows are PTDF rows over nodal injections. Most days no limit
//! binds and the merit-order solution is already optimal; otherwise the
//! violated line rows are added to an LP and re-solved until every line is
//! within its limit.
//!
//! Ties between equal-cost generators are broken by a tiny cost ramp that
//! makes higher generator ids cheaper, which is the lexicographically
//! smallest generation vector whenever no line binds. Shedding is likewise
//! ramped so lower bus ids are shed first.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::GridNetwork;
use crate::lp::LinearProgram;

/// Loading-ratio threshold is measured against the limit; flows above
/// `limit·(1 + LIMIT_TOL)` trigger another row-generation round.
const LIMIT_TOL: f64 = 1e-9;
const GEN_RAMP: f64 = 1e-5;
const SHED_RAMP: f64 = 1e-5;
/// Residual bound for the post-solve invariant check.
pub const RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispatchOptions {
    /// Shed penalty `W` as a multiple of the largest marginal cost.
    pub shed_penalty_factor: f64,
}

impl Default for DispatchOptions {
    fn default() -> Self {
        Self {
            shed_penalty_factor: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchSolution {
    pub generation: Vec<f64>,
    /// Signed line flows, `from → to` positive.
    pub flows: Vec<f64>,
    pub shed: Vec<f64>,
    pub angles: Vec<f64>,
    /// `M_ij = |flow| / limit`, zero for lines out of service.
    pub loading: Vec<f64>,
    pub total_shed: f64,
    pub total_demand: f64,
}

impl DispatchSolution {
    /// Generation cost plus shed penalty, without the tie-breaking ramps.
    pub fn cost(&self, network: &GridNetwork, options: &DispatchOptions) -> f64 {
        let w = shed_penalty(network, options);
        self.generation
            .iter()
            .zip(&network.generators)
            .map(|(p, g)| p * g.marginal_cost)
            .sum::<f64>()
            + w * self.total_shed
    }

    pub fn mean_loading(&self) -> f64 {
        if self.loading.is_empty() {
            0.0
        } else {
            self.loading.iter().sum::<f64>() / self.loading.len() as f64
        }
    }
}

fn shed_penalty(network: &GridNetwork, options: &DispatchOptions) -> f64 {
    options.shed_penalty_factor * network.max_marginal_cost().max(1.0)
}

/// `M_ij` for every line; out-of-service lines report zero.
pub fn line_loading(flows: &[f64], network: &GridNetwork, in_service: &[bool]) -> Vec<f64> {
    network
        .lines
        .iter()
        .zip(flows)
        .zip(in_service)
        .map(|((line, f), &up)| if up { f.abs() / line.flow_limit } else { 0.0 })
        .collect()
}

struct Component {
    buses: Vec<usize>,
    lines: Vec<usize>,
    /// Generators at this component's buses, cheapest first.
    gens: Vec<usize>,
    /// Inverse of the reduced susceptance matrix, padded with a zero row and
    /// column for the slack (first) bus. Row-major `k × k`.
    x: Vec<f64>,
}

impl Component {
    fn k(&self) -> usize {
        self.buses.len()
    }

    fn x(&self, a: usize, b: usize) -> f64 {
        self.x[a * self.k() + b]
    }
}

/// Factorised DC model of one network topology.
pub struct DcModel {
    in_service: Vec<bool>,
    components: Vec<Component>,
    /// Bus → (component, local index).
    bus_slot: Vec<(usize, usize)>,
    gen_cost: Vec<f64>,
    options: DispatchOptions,
}

impl DcModel {
    /// Model of the network with its own `in_service` flags.
    pub fn new(network: &GridNetwork, options: DispatchOptions) -> Result<Self> {
        let mask: Vec<bool> = network.lines.iter().map(|l| l.in_service).collect();
        Self::with_service(network, &mask, options)
    }

    /// Model with an explicit in-service mask (combined with nothing else).
    pub fn with_service(network: &GridNetwork, in_service: &[bool], options: DispatchOptions) -> Result<Self> {
        let nb = network.num_buses();
        if in_service.len() != network.num_lines() {
            return Err(Error::Contract("in-service mask length differs from line count".into()));
        }

        // Union-find over in-service lines.
        let mut parent: Vec<usize> = (0..nb).collect();
        fn find(p: &mut [usize], mut a: usize) -> usize {
            while p[a] != a {
                p[a] = p[p[a]];
                a = p[a];
            }
            a
        }
        for (line, &up) in network.lines.iter().zip(in_service) {
            if up {
                let a = find(&mut parent, line.from_bus);
                let b = find(&mut parent, line.to_bus);
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut root_comp = vec![usize::MAX; nb];
        let mut bus_slot = vec![(0, 0); nb];
        let mut comps: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        for b in 0..nb {
            let r = find(&mut parent, b);
            if root_comp[r] == usize::MAX {
                root_comp[r] = comps.len();
                comps.push((Vec::new(), Vec::new()));
            }
            let c = root_comp[r];
            bus_slot[b] = (c, comps[c].0.len());
            comps[c].0.push(b);
        }
        for (l, (line, &up)) in network.lines.iter().zip(in_service).enumerate() {
            if up {
                comps[bus_slot[line.from_bus].0].1.push(l);
            }
        }

        let mut components = Vec::with_capacity(comps.len());
        for (buses, lines) in comps {
            let k = buses.len();
            let mut x = vec![0.0; k * k];
            if k > 1 {
                let mut bred = DMatrix::<f64>::zeros(k - 1, k - 1);
                for &l in &lines {
                    let line = &network.lines[l];
                    let s = line.susceptance;
                    let i = bus_slot[line.from_bus].1;
                    let j = bus_slot[line.to_bus].1;
                    if i > 0 {
                        bred[(i - 1, i - 1)] += s;
                    }
                    if j > 0 {
                        bred[(j - 1, j - 1)] += s;
                    }
                    if i > 0 && j > 0 {
                        bred[(i - 1, j - 1)] -= s;
                        bred[(j - 1, i - 1)] -= s;
                    }
                }
                let chol = bred
                    .cholesky()
                    .ok_or_else(|| Error::Internal("reduced susceptance matrix is not positive definite".into()))?;
                let inv = chol.inverse();
                for a in 1..k {
                    for b in 1..k {
                        x[a * k + b] = inv[(a - 1, b - 1)];
                    }
                }
            }
            components.push(Component {
                buses,
                lines,
                gens: Vec::new(),
                x,
            });
        }

        let ng = network.generators.len();
        let gen_cost: Vec<f64> = network
            .generators
            .iter()
            .enumerate()
            .map(|(g, gen)| gen.marginal_cost + GEN_RAMP * (ng - g) as f64 / ng as f64)
            .collect();
        let mut gen_order: Vec<usize> = (0..ng).collect();
        gen_order.sort_by(|&a, &b| gen_cost[a].total_cmp(&gen_cost[b]).then(b.cmp(&a)));
        for &g in &gen_order {
            let c = bus_slot[network.generators[g].bus].0;
            components[c].gens.push(g);
        }

        Ok(Self {
            in_service: in_service.to_vec(),
            components,
            bus_slot,
            gen_cost,
            options,
        })
    }

    pub fn in_service(&self) -> &[bool] {
        &self.in_service
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    /// Solves the dispatch for per-bus demand and per-generator availability.
    pub fn dispatch(&self, network: &GridNetwork, demand: &[f64], available: &[f64]) -> Result<DispatchSolution> {
        let nb = network.num_buses();
        let ng = network.generators.len();
        if demand.len() != nb || available.len() != ng {
            return Err(Error::Contract(format!(
                "dispatch expects {nb} demands and {ng} capacities, got {} and {}",
                demand.len(),
                available.len()
            )));
        }
        if demand.iter().chain(available).any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Contract(
                "demand and available capacity must be finite and non-negative".into(),
            ));
        }

        let w = shed_penalty(network, &self.options);
        let mut generation = vec![0.0; ng];
        let mut served = vec![0.0; nb];
        let mut angles = vec![0.0; nb];
        let mut flows = vec![0.0; network.num_lines()];

        for comp in &self.components {
            let gens: Vec<usize> = comp.gens.iter().copied().filter(|&g| available[g] > 0.0).collect();
            // Highest bus id first: lowest ids are shed first.
            let loads: Vec<usize> = comp.buses.iter().rev().copied().filter(|&b| demand[b] > 0.0).collect();

            merit_order(&gens, &loads, demand, available, &mut generation, &mut served);
            let mut inj = self.injections(comp, network, &generation, &served);
            self.solve_angles(comp, &inj, &mut angles);
            self.fill_flows(comp, network, &angles, &mut flows);

            let mut active: Vec<usize> = Vec::new();
            loop {
                let violated: Vec<usize> = comp
                    .lines
                    .iter()
                    .copied()
                    .filter(|&l| {
                        let lim = network.lines[l].flow_limit;
                        flows[l].abs() > lim + LIMIT_TOL * lim.max(1.0) && !active.contains(&l)
                    })
                    .collect();
                if violated.is_empty() {
                    break;
                }
                active.extend(violated);
                active.sort_unstable();
                self.solve_lp(
                    comp,
                    network,
                    &gens,
                    &loads,
                    &active,
                    demand,
                    available,
                    w,
                    &mut generation,
                    &mut served,
                )?;
                inj = self.injections(comp, network, &generation, &served);
                self.solve_angles(comp, &inj, &mut angles);
                self.fill_flows(comp, network, &angles, &mut flows);
            }
        }

        let shed: Vec<f64> = demand.iter().zip(&served).map(|(d, s)| (d - s).max(0.0)).collect();
        let loading = line_loading(&flows, network, &self.in_service);
        let solution = DispatchSolution {
            generation,
            flows,
            shed: shed.clone(),
            angles,
            loading,
            total_shed: shed.iter().sum(),
            total_demand: demand.iter().sum(),
        };
        self.verify(network, demand, available, &solution)?;
        Ok(solution)
    }

    fn injections(&self, comp: &Component, network: &GridNetwork, generation: &[f64], served: &[f64]) -> Vec<f64> {
        let mut inj: Vec<f64> = comp.buses.iter().map(|&b| -served[b]).collect();
        for &g in &comp.gens {
            inj[self.bus_slot[network.generators[g].bus].1] += generation[g];
        }
        inj
    }

    fn solve_angles(&self, comp: &Component, inj: &[f64], angles: &mut [f64]) {
        let k = comp.k();
        for a in 0..k {
            let row = &comp.x[a * k..(a + 1) * k];
            angles[comp.buses[a]] = row.iter().zip(inj).map(|(x, p)| x * p).sum();
        }
    }

    fn fill_flows(&self, comp: &Component, network: &GridNetwork, angles: &[f64], flows: &mut [f64]) {
        for &l in &comp.lines {
            let line = &network.lines[l];
            flows[l] = line.susceptance * (angles[line.from_bus] - angles[line.to_bus]);
        }
    }

    fn ptdf_row(&self, comp: &Component, network: &GridNetwork, l: usize) -> Vec<f64> {
        let line = &network.lines[l];
        let i = self.bus_slot[line.from_bus].1;
        let j = self.bus_slot[line.to_bus].1;
        (0..comp.k())
            .map(|b| line.susceptance * (comp.x(i, b) - comp.x(j, b)))
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn solve_lp(
        &self,
        comp: &Component,
        network: &GridNetwork,
        gens: &[usize],
        loads: &[usize],
        active: &[usize],
        demand: &[f64],
        available: &[f64],
        w: f64,
        generation: &mut [f64],
        served: &mut [f64],
    ) -> Result<()> {
        let nb = network.num_buses();
        let mut lp = LinearProgram::new();
        let gen_var: Vec<usize> = gens
            .iter()
            .map(|&g| lp.add_var(self.gen_cost[g], 0.0, available[g]))
            .collect();
        let load_var: Vec<usize> = loads
            .iter()
            .map(|&b| {
                let value = w * (1.0 + SHED_RAMP * b as f64 / nb as f64);
                lp.add_var(-value, 0.0, demand[b])
            })
            .collect();

        let mut balance: Vec<(usize, f64)> = gen_var.iter().map(|&v| (v, 1.0)).collect();
        balance.extend(load_var.iter().map(|&v| (v, -1.0)));
        lp.add_eq(balance, 0.0);

        for &l in active {
            let ptdf = self.ptdf_row(comp, network, l);
            let lim = network.lines[l].flow_limit;
            let s = lp.add_var(0.0, -lim, lim);
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(gens.len() + loads.len() + 1);
            for (&g, &v) in gens.iter().zip(&gen_var) {
                row.push((v, ptdf[self.bus_slot[network.generators[g].bus].1]));
            }
            for (&b, &v) in loads.iter().zip(&load_var) {
                row.push((v, -ptdf[self.bus_slot[b].1]));
            }
            row.push((s, -1.0));
            lp.add_eq(row, 0.0);
        }

        let sol = lp
            .solve()
            .map_err(|e| Error::Internal(format!("dispatch LP failed: {e}")))?;
        for (&g, &v) in gens.iter().zip(&gen_var) {
            generation[g] = sol.x[v];
        }
        for (&b, &v) in loads.iter().zip(&load_var) {
            served[b] = sol.x[v];
        }
        Ok(())
    }

    fn verify(&self, network: &GridNetwork, demand: &[f64], available: &[f64], s: &DispatchSolution) -> Result<()> {
        let fail = |what: String| Err(Error::Internal(format!("dispatch invariant violated: {what}")));
        for (g, (&p, &cap)) in s.generation.iter().zip(available).enumerate() {
            if p < -RESIDUAL_TOL || p > cap + RESIDUAL_TOL {
                return fail(format!("generator {g} output {p} outside [0, {cap}]"));
            }
        }
        for (b, (&sh, &d)) in s.shed.iter().zip(demand).enumerate() {
            if sh < -RESIDUAL_TOL || sh > d + RESIDUAL_TOL {
                return fail(format!("bus {b} shed {sh} outside [0, {d}]"));
            }
        }
        for (c, comp) in self.components.iter().enumerate() {
            let mut balance: f64 = comp.buses.iter().map(|&b| -(demand[b] - s.shed[b])).sum();
            balance += comp.gens.iter().map(|&g| s.generation[g]).sum::<f64>();
            if balance.abs() > RESIDUAL_TOL {
                return fail(format!("component {c} power balance residual {balance}"));
            }
        }
        for (l, line) in network.lines.iter().enumerate() {
            if !self.in_service[l] {
                continue;
            }
            let dc = line.susceptance * (s.angles[line.from_bus] - s.angles[line.to_bus]);
            if (dc - s.flows[l]).abs() > RESIDUAL_TOL {
                return fail(format!("line {l} flow equation residual {}", dc - s.flows[l]));
            }
            if s.flows[l].abs() > line.flow_limit + RESIDUAL_TOL {
                return fail(format!(
                    "line {l} flow {} exceeds limit {}",
                    s.flows[l], line.flow_limit
                ));
            }
        }
        Ok(())
    }
}

/// Cheapest generation against most valuable load, ignoring line limits.
fn merit_order(
    gens: &[usize],
    loads: &[usize],
    demand: &[f64],
    available: &[f64],
    generation: &mut [f64],
    served: &mut [f64],
) {
    let supply: f64 = gens.iter().map(|&g| available[g]).sum();
    let load: f64 = loads.iter().map(|&b| demand[b]).sum();
    let target = supply.min(load);

    let mut left = target;
    for &g in gens {
        let p = available[g].min(left);
        generation[g] = p;
        left -= p;
    }
    if supply <= load {
        for &g in gens {
            generation[g] = available[g];
        }
    }
    let mut left = target;
    for &b in loads {
        let p = demand[b].min(left);
        served[b] = p;
        left -= p;
    }
    if load <= supply {
        for &b in loads {
            served[b] = demand[b];
        }
    }
}

/// One-shot dispatch on the network's own in-service flags.
pub fn solve_dispatch(network: &GridNetwork, demand: &[f64], available: &[f64]) -> Result<DispatchSolution> {
    DcModel::new(network, DispatchOptions::default())?.dispatch(network, demand, available)
}

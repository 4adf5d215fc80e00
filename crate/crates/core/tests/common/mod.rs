//! Brute-force oracles shared by the integration tests and the acceptance
//! suite.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;

use gridopa::grid::{Bus, Generator, GeneratorKind, GridNetwork, Line};
use rand::Rng;

// ---------------------------------------------------------------- planner

#[derive(Debug, Clone, Copy)]
pub struct LatticePlan {
    /// Lattice units of energy.
    pub energy: i64,
    pub r_max: i64,
}

/// Lexicographic (max energy, min R_max) over integer monthly levels, by
/// dynamic programming on the storage content at month boundaries.
pub fn lattice_plan(p_in: &[i64], months: &[usize]) -> LatticePlan {
    // storage at month start → smallest running maximum reaching it
    let mut states: BTreeMap<i64, i64> = BTreeMap::from([(0, 0)]);
    let mut t = 0;
    for &len in months {
        let days = &p_in[t..t + len];
        t += len;
        let mut next: BTreeMap<i64, i64> = BTreeMap::new();
        for (&r0, &peak0) in &states {
            for level in 0.. {
                let mut r = r0;
                let mut peak = peak0;
                let mut feasible = true;
                for &p in days {
                    r += p - level;
                    if r < 0 {
                        feasible = false;
                        break;
                    }
                    peak = peak.max(r);
                }
                if !feasible {
                    break;
                }
                next.entry(r).and_modify(|m| *m = (*m).min(peak)).or_insert(peak);
            }
        }
        states = next;
    }
    let (&r_end, &r_max) = states.iter().next().expect("the zero plan is always feasible");
    LatticePlan {
        energy: p_in.iter().sum::<i64>() - r_end,
        r_max,
    }
}

// ---------------------------------------------------------------- dispatch

pub struct DispatchInstance {
    pub network: GridNetwork,
    /// Lattice units.
    pub demand: Vec<i64>,
    pub capacity: Vec<i64>,
    pub unit: f64,
    /// The topology is a tree.
    pub radial: bool,
}

impl DispatchInstance {
    pub fn demand_mw(&self) -> Vec<f64> {
        self.demand.iter().map(|&d| d as f64 * self.unit).collect()
    }

    pub fn capacity_mw(&self) -> Vec<f64> {
        self.capacity.iter().map(|&c| c as f64 * self.unit).collect()
    }
}

/// Connected 2–4 bus grid with one or two generators; every number on the
/// 0.1 MW lattice.
pub fn random_instance<R: Rng>(rng: &mut R, meshed: bool) -> DispatchInstance {
    let nb = rng.random_range(if meshed { 3..=4 } else { 2..=4 });
    let mut pairs: Vec<(usize, usize)> = (1..nb).map(|b| (rng.random_range(0..b), b)).collect();
    if meshed {
        let extra = rng.random_range(1..=nb - 2);
        let mut candidates: Vec<(usize, usize)> = (0..nb)
            .flat_map(|a| (a + 1..nb).map(move |b| (a, b)))
            .filter(|p| !pairs.contains(p))
            .collect();
        for _ in 0..extra.min(candidates.len()) {
            let k = rng.random_range(0..candidates.len());
            pairs.push(candidates.swap_remove(k));
        }
    }
    let lines: Vec<Line> = pairs
        .iter()
        .enumerate()
        .map(|(id, &(a, b))| Line {
            id,
            from_bus: a,
            to_bus: b,
            susceptance: if meshed { rng.random_range(1..=3) as f64 } else { 1.0 },
            flow_limit: rng.random_range(1..=12) as f64 * 0.1,
            in_service: true,
        })
        .collect();
    let ng = rng.random_range(1..=2);
    let generators: Vec<Generator> = (0..ng)
        .map(|id| Generator {
            id,
            bus: rng.random_range(0..nb),
            kind: GeneratorKind::Conventional,
            capacity: 0.0,
            marginal_cost: rng.random_range(1..=3) as f64,
        })
        .collect();
    let capacity: Vec<i64> = (0..ng).map(|_| rng.random_range(0..=12)).collect();
    let demand: Vec<i64> = (0..nb).map(|_| rng.random_range(0..=8)).collect();
    let total: i64 = demand.iter().sum();
    let buses = (0..nb)
        .map(|id| Bus {
            id,
            name: format!("b{id}"),
            demand_fraction: if total > 0 {
                demand[id] as f64 / total as f64
            } else {
                1.0 / nb as f64
            },
        })
        .collect();
    let mut network = GridNetwork {
        buses,
        lines,
        generators,
    };
    for (g, &c) in network.generators.iter_mut().zip(&capacity) {
        g.capacity = c as f64 * 0.1;
    }
    DispatchInstance {
        network,
        demand,
        capacity,
        unit: 0.1,
        radial: !meshed,
    }
}

/// Flow of every line per unit injection at every bus (slack bus 0), by
/// Gaussian elimination on the reduced susceptance matrix.
pub fn ptdf(network: &GridNetwork) -> Vec<Vec<f64>> {
    let nb = network.num_buses();
    let k = nb - 1;
    let mut b = vec![vec![0.0; k]; k];
    for l in &network.lines {
        let (i, j, s) = (l.from_bus, l.to_bus, l.susceptance);
        for (x, y, v) in [(i, i, s), (j, j, s), (i, j, -s), (j, i, -s)] {
            if x > 0 && y > 0 {
                b[x - 1][y - 1] += v;
            }
        }
    }
    // columns of B⁻¹
    let mut inv = vec![vec![0.0; k]; k];
    for (col, inv_col) in inv.iter_mut().enumerate() {
        let mut a = b.clone();
        let mut rhs = vec![0.0; k];
        rhs[col] = 1.0;
        for p in 0..k {
            let piv = (p..k).max_by(|&x, &y| a[x][p].abs().total_cmp(&a[y][p].abs())).unwrap();
            a.swap(p, piv);
            rhs.swap(p, piv);
            for r in p + 1..k {
                let f = a[r][p] / a[p][p];
                for c in p..k {
                    a[r][c] -= f * a[p][c];
                }
                rhs[r] -= f * rhs[p];
            }
        }
        for p in (0..k).rev() {
            let s: f64 = (p + 1..k).map(|c| a[p][c] * inv_col[c]).sum();
            inv_col[p] = (rhs[p] - s) / a[p][p];
        }
    }
    let theta = |bus: usize, inj_bus: usize| {
        if bus == 0 || inj_bus == 0 {
            0.0
        } else {
            inv[inj_bus - 1][bus - 1]
        }
    };
    network
        .lines
        .iter()
        .map(|l| {
            (0..nb)
                .map(|n| l.susceptance * (theta(l.from_bus, n) - theta(l.to_bus, n)))
                .collect()
        })
        .collect()
}

/// Cheapest lattice point of the dispatch problem, `Σ c·g + W·Σ shed`.
pub fn lattice_dispatch(inst: &DispatchInstance, shed_penalty: f64) -> f64 {
    let net = &inst.network;
    let nb = net.num_buses();
    let ptdf = ptdf(net);
    let limits: Vec<f64> = net.lines.iter().map(|l| l.flow_limit).collect();
    let total_demand: i64 = inst.demand.iter().sum();
    let loaded: Vec<usize> = (0..nb).filter(|&b| inst.demand[b] > 0).collect();
    let mut best = f64::INFINITY;

    let mut gen = vec![0i64; net.generators.len()];
    let mut shed = vec![0i64; nb];
    loop {
        let supply: i64 = gen.iter().sum();
        if supply <= total_demand {
            let need_shed = total_demand - supply;
            enumerate_shed(&loaded, 0, need_shed, &inst.demand, &mut shed, &mut |shed| {
                let mut inj = vec![0.0; nb];
                for (g, &p) in net.generators.iter().zip(&gen) {
                    inj[g.bus] += p as f64 * inst.unit;
                }
                for b in 0..nb {
                    inj[b] -= (inst.demand[b] - shed[b]) as f64 * inst.unit;
                }
                let ok = ptdf.iter().zip(&limits).all(|(row, lim)| {
                    let f: f64 = row.iter().zip(&inj).map(|(a, x)| a * x).sum();
                    f.abs() <= lim + 1e-9
                });
                if ok {
                    let cost = net
                        .generators
                        .iter()
                        .zip(&gen)
                        .map(|(g, &p)| g.marginal_cost * p as f64 * inst.unit)
                        .sum::<f64>()
                        + shed_penalty * need_shed as f64 * inst.unit;
                    best = best.min(cost);
                }
            });
        }
        // odometer over generator outputs
        let mut i = 0;
        loop {
            if i == gen.len() {
                return best;
            }
            if gen[i] < inst.capacity[i] {
                gen[i] += 1;
                break;
            }
            gen[i] = 0;
            i += 1;
        }
    }
}

/// Exact optimum by enumerating every vertex of the dispatch polytope.
///
/// Variables are generator outputs and shed at loaded buses; a vertex is the
/// balance equation plus `n − 1` active inequalities. Only viable for a
/// handful of variables.
pub fn vertex_dispatch(inst: &DispatchInstance, shed_penalty: f64) -> f64 {
    let net = &inst.network;
    let nb = net.num_buses();
    let ptdf = ptdf(net);
    let demand = inst.demand_mw();
    let capacity = inst.capacity_mw();
    let loaded: Vec<usize> = (0..nb).filter(|&b| demand[b] > 0.0).collect();
    let ng = net.generators.len();
    let n = ng + loaded.len();
    let bus_of = |v: usize| if v < ng { net.generators[v].bus } else { loaded[v - ng] };
    let cost: Vec<f64> = (0..n)
        .map(|v| {
            if v < ng {
                net.generators[v].marginal_cost
            } else {
                shed_penalty
            }
        })
        .collect();

    // rows a·x ≤ b
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for v in 0..n {
        let mut a = vec![0.0; n];
        a[v] = 1.0;
        let upper = if v < ng { capacity[v] } else { demand[loaded[v - ng]] };
        rows.push((a.clone(), upper));
        a[v] = -1.0;
        rows.push((a, 0.0));
    }
    for (row, line) in ptdf.iter().zip(&net.lines) {
        // flow = Σ row[bus]·x + offset, with offset from the full demand
        let a: Vec<f64> = (0..n).map(|v| row[bus_of(v)]).collect();
        let offset: f64 = -(0..nb).map(|b| row[b] * demand[b]).sum::<f64>();
        rows.push((a.clone(), line.flow_limit - offset));
        rows.push((a.iter().map(|x| -x).collect(), line.flow_limit + offset));
    }
    let total: f64 = demand.iter().sum();
    let feasible = |x: &[f64]| {
        rows.iter()
            .all(|(a, b)| a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-7)
    };

    let mut best = f64::INFINITY;
    let k = n - 1;
    let mut pick: Vec<usize> = (0..k).collect();
    loop {
        let mut m: Vec<Vec<f64>> = vec![vec![1.0; n]];
        let mut rhs = vec![total];
        for &r in &pick {
            m.push(rows[r].0.clone());
            rhs.push(rows[r].1);
        }
        if let Some(x) = solve_square(m, rhs) {
            if feasible(&x) {
                best = best.min(x.iter().zip(&cost).map(|(a, c)| a * c).sum());
            }
        }
        // next k-combination of rows
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < rows.len() - k + i {
                pick[i] += 1;
                for j in i + 1..k {
                    pick[j] = pick[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for p in 0..n {
        let piv = (p..n).max_by(|&x, &y| m[x][p].abs().total_cmp(&m[y][p].abs()))?;
        if m[piv][p].abs() < 1e-10 {
            return None;
        }
        m.swap(p, piv);
        rhs.swap(p, piv);
        for r in p + 1..n {
            let f = m[r][p] / m[p][p];
            for c in p..n {
                m[r][c] -= f * m[p][c];
            }
            rhs[r] -= f * rhs[p];
        }
    }
    let mut x = vec![0.0; n];
    for p in (0..n).rev() {
        let s: f64 = (p + 1..n).map(|c| m[p][c] * x[c]).sum();
        x[p] = (rhs[p] - s) / m[p][p];
    }
    Some(x)
}

fn enumerate_shed(
    loaded: &[usize],
    k: usize,
    remaining: i64,
    demand: &[i64],
    shed: &mut [i64],
    visit: &mut impl FnMut(&[i64]),
) {
    if k == loaded.len() {
        if remaining == 0 {
            visit(shed);
        }
        return;
    }
    let b = loaded[k];
    let rest: i64 = loaded[k + 1..].iter().map(|&x| demand[x]).sum();
    let lo = (remaining - rest).max(0);
    let hi = remaining.min(demand[b]);
    for s in lo..=hi {
        shed[b] = s;
        enumerate_shed(loaded, k + 1, remaining - s, demand, shed, visit);
    }
    shed[b] = 0;
}

// ---------------------------------------------------------------- cascade

/// Four-bus ring: generator at bus 0, load at bus 2, lines
/// 0: 0–1, 1: 1–2, 2: 2–3, 3: 3–0, all unit susceptance.
pub fn ring4(limits: [f64; 4], capacity: f64) -> GridNetwork {
    let pairs = [(0, 1), (1, 2), (2, 3), (3, 0)];
    GridNetwork {
        buses: (0..4)
            .map(|id| Bus {
                id,
                name: format!("r{id}"),
                demand_fraction: if id == 2 { 1.0 } else { 0.0 },
            })
            .collect(),
        lines: pairs
            .iter()
            .zip(limits)
            .enumerate()
            .map(|(id, (&(a, b), lim))| Line {
                id,
                from_bus: a,
                to_bus: b,
                susceptance: 1.0,
                flow_limit: lim,
                in_service: true,
            })
            .collect(),
        generators: vec![Generator {
            id: 0,
            bus: 0,
            kind: GeneratorKind::Conventional,
            capacity,
            marginal_cost: 1.0,
        }],
    }
}

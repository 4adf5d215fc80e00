//! Synthetic 62-bus / 89-line reference grid shaped like an island
//! archipelago: a large meshed island, two medium islands, one small island
//! and a handful of inter-island links. Electrical data are invented; the
//! bundled `data/balearic_like.toml` is this network written to disk.

use crate::dispatch::{DcModel, DispatchOptions};
use crate::error::{Error, Result};
use crate::grid::{nodal_demand, Bus, Generator, GeneratorKind, GridNetwork, Line};

pub const REFERENCE_MEAN_DEMAND_MW: f64 = 1000.0;
pub const DEFAULT_HEADROOM: f64 = 1.3;
pub const MIN_FLOW_LIMIT_MW: f64 = 10.0;

struct Island {
    name: &'static str,
    buses: usize,
    share: f64,
    chords: &'static [(usize, usize)],
    ring: bool,
}

const ISLANDS: [Island; 4] = [
    Island {
        name: "mallorca",
        buses: 40,
        share: 0.78,
        chords: &[
            (0, 10),
            (2, 17),
            (4, 25),
            (5, 33),
            (7, 20),
            (9, 30),
            (11, 24),
            (12, 36),
            (14, 28),
            (15, 3),
            (16, 38),
            (18, 31),
            (19, 8),
            (21, 35),
            (23, 1),
            (26, 13),
            (27, 6),
            (29, 37),
        ],
        ring: true,
    },
    Island {
        name: "menorca",
        buses: 9,
        share: 0.09,
        chords: &[(0, 4), (2, 6)],
        ring: true,
    },
    Island {
        name: "ibiza",
        buses: 10,
        share: 0.12,
        chords: &[(0, 5), (2, 7), (4, 8)],
        ring: true,
    },
    Island {
        name: "formentera",
        buses: 3,
        share: 0.01,
        chords: &[],
        ring: false,
    },
];

/// Global bus pairs joining the islands.
const LINKS: [(usize, usize); 5] = [(3, 40), (35, 47), (20, 49), (55, 59), (57, 59)];

/// (bus, capacity MW). All conventional with cost 1; with equal costs the
/// highest id is dispatched first, so the small island plants come last.
const GENERATORS: [(usize, f64); 7] = [
    (30, 200.0), // mallorca peaker
    (12, 300.0),
    (0, 200.0),  // mainland-link equivalent
    (22, 380.0), // mallorca baseload
    (52, 170.0), // ibiza
    (42, 130.0), // menorca
    (61, 20.0),  // formentera
];

/// Topology, demand fractions and generators, with unbounded flow limits.
pub fn reference_topology() -> GridNetwork {
    let mut buses = Vec::new();
    let mut lines = Vec::new();
    let add_line = |lines: &mut Vec<Line>, a: usize, b: usize| {
        let id = lines.len();
        lines.push(Line {
            id,
            from_bus: a,
            to_bus: b,
            susceptance: 1.0,
            flow_limit: 1e12,
            in_service: true,
        });
    };

    let mut offset = 0;
    for island in &ISLANDS {
        let weights: Vec<f64> = (0..island.buses)
            .map(|i| 1.0 + 0.6 * ((i * 37 + 5) % 11) as f64 / 10.0)
            .collect();
        let total: f64 = weights.iter().sum();
        for (i, w) in weights.iter().enumerate() {
            buses.push(Bus {
                id: offset + i,
                name: format!("{}-{i}", island.name),
                demand_fraction: island.share * w / total,
            });
        }
        let n = island.buses;
        let ring_lines = if island.ring { n } else { n - 1 };
        for i in 0..ring_lines {
            add_line(&mut lines, offset + i, offset + (i + 1) % n);
        }
        for &(a, b) in island.chords {
            add_line(&mut lines, offset + a, offset + b);
        }
        offset += n;
    }
    for &(a, b) in &LINKS {
        add_line(&mut lines, a, b);
    }

    let generators = GENERATORS
        .iter()
        .enumerate()
        .map(|(id, &(bus, capacity))| Generator {
            id,
            bus,
            kind: GeneratorKind::Conventional,
            capacity,
            marginal_cost: 1.0,
        })
        .collect();
    GridNetwork {
        buses,
        lines,
        generators,
    }
}

/// Sets every flow limit to `max(headroom·|flow|, floor)` where `flow` is
/// the unconstrained dispatch at `demand_mw`.
pub fn bootstrap_flow_limits(network: &mut GridNetwork, demand_mw: f64, headroom: f64, floor: f64) -> Result<()> {
    if !(headroom >= 1.0 && floor > 0.0) {
        return Err(Error::Config("headroom must be ≥ 1 and the floor positive".into()));
    }
    let mut open = network.clone();
    for l in &mut open.lines {
        l.flow_limit = 1e12;
    }
    let demand = nodal_demand(&open.demand_fractions(), demand_mw)?;
    let available: Vec<f64> = open.generators.iter().map(|g| g.capacity).collect();
    let solution = DcModel::new(&open, DispatchOptions::default())?.dispatch(&open, &demand, &available)?;
    if solution.total_shed > 1e-6 {
        return Err(Error::Config(format!(
            "bootstrap dispatch sheds {:.3} MW; capacity below {demand_mw} MW",
            solution.total_shed
        )));
    }
    for (line, flow) in network.lines.iter_mut().zip(&solution.flows) {
        line.flow_limit = (headroom * flow.abs()).max(floor);
    }
    Ok(())
}

/// The reference grid with limits bootstrapped at the reference mean demand.
pub fn balearic_like() -> Result<GridNetwork> {
    let mut net = reference_topology();
    bootstrap_flow_limits(&mut net, REFERENCE_MEAN_DEMAND_MW, DEFAULT_HEADROOM, MIN_FLOW_LIMIT_MW)?;
    net.validate()?;
    Ok(net)
}

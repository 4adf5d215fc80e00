//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 1-5 and 11 are exact properties and fail the run. Criteria 6-10
//! are statistical trends on the bundled grid; they are reported but do not
//! change the exit status.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use common::{lattice_dispatch, lattice_plan, ptdf, random_instance, ring4, vertex_dispatch, DispatchInstance};
use gridopa::cascade::{run_cascade, CascadeParams};
use gridopa::dispatch::{DcModel, DispatchOptions, DispatchSolution};
use gridopa::evolution::{EvolutionParams, SystemState};
use gridopa::grid::DemandProfile;
use gridopa::metrics::{pooled, CoverageHistogram};
use gridopa::res::{plan_outflow, PlantKind, PlantProfile, PlantTemplate};
use gridopa::scenario::{
    mean_raw_risk, mean_std, median, normalize_all, select_optimal, Placement, RealizationResult, Scenario,
    ScenarioConfig, SUMMER_MONTHS, WINTER_MONTHS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const DAYS: u64 = 20000;
const REALIZATIONS: usize = 32;
const RESIDUAL: f64 = 1e-6;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- 1

fn planner_matches(p_in: &[i64], months: &[usize], unit: f64) -> Result<(), String> {
    let series: Vec<f64> = p_in.iter().map(|&p| p as f64 * unit).collect();
    let plan = plan_outflow(&series, months).map_err(|e| e.to_string())?;
    let oracle = lattice_plan(p_in, months);
    let slack = unit * months.iter().sum::<usize>() as f64 + 1e-9;
    let trajectory = plan.storage_trajectory(&series, months);
    ensure(trajectory.iter().all(|&r| r >= 0.0), || {
        format!("negative storage for {p_in:?}")
    })?;
    let energy = oracle.energy as f64 * unit;
    ensure(
        plan.delivered_energy >= energy - 1e-7 && plan.delivered_energy <= energy + slack,
        || format!("energy {} vs lattice {energy} for {p_in:?}", plan.delivered_energy),
    )?;
    let r_max = oracle.r_max as f64 * unit;
    ensure((plan.required_storage - r_max).abs() <= slack, || {
        format!("R_max {} vs lattice {r_max} for {p_in:?}", plan.required_storage)
    })
}

fn c1() -> Outcome {
    let refine = 20;
    let unit = 0.1 / refine as f64;
    let months = [5usize; 6];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let years = 60;
    for _ in 0..years {
        let p: Vec<i64> = (0..30).map(|_| rng.random_range(0..=10) * refine).collect();
        planner_matches(&p, &months, unit)?;
    }
    Ok(format!("{years} toy years agree with the lattice search"))
}

// ---------------------------------------------------------------- 2

fn c2() -> Outcome {
    let days: f64 = 850.0 / (91850.0 / 365.0);
    ensure((days - 3.378).abs() < 5e-4, || {
        format!("850 kWday over 91850/365 kW is {days}")
    })?;
    ensure((days - 3.4).abs() < 0.05, || format!("{days} days is not about 3.4"))?;
    let t = PlantTemplate::calibrate(PlantKind::Solar, &PlantProfile::default_solar(), 0).map_err(|e| e.to_string())?;
    let kappa = t.planning_storage_days;
    ensure((2.5..=4.5).contains(&kappa), || format!("solar storage {kappa} days"))?;
    Ok(format!(
        "ratio {days:.4} days; default solar profile needs {kappa:.3} days"
    ))
}

// ---------------------------------------------------------------- 3

fn residuals(inst: &DispatchInstance, s: &DispatchSolution) -> Result<(), String> {
    let net = &inst.network;
    let demand = inst.demand_mw();
    let served: f64 = demand.iter().zip(&s.shed).map(|(d, x)| d - x).sum();
    let generated: f64 = s.generation.iter().sum();
    ensure((served - generated).abs() < RESIDUAL, || {
        format!("balance residual {}", served - generated)
    })?;
    let mut injection = vec![0.0; net.num_buses()];
    for (g, p) in net.generators.iter().zip(&s.generation) {
        injection[g.bus] += p;
    }
    for (b, (d, x)) in demand.iter().zip(&s.shed).enumerate() {
        injection[b] -= d - x;
    }
    for (l, row) in ptdf(net).iter().enumerate() {
        let f: f64 = row.iter().zip(&injection).map(|(a, p)| a * p).sum();
        ensure((f - s.flows[l]).abs() < RESIDUAL, || {
            format!("line {l}: flow {} vs {f}", s.flows[l])
        })?;
        ensure(s.flows[l].abs() <= net.lines[l].flow_limit + RESIDUAL, || {
            format!("line {l} over its limit")
        })?;
    }
    Ok(())
}

fn c3() -> Outcome {
    let opts = DispatchOptions::default();
    let mut net = ring4([10.0; 4], 10.0);
    net.buses.truncate(3);
    net.buses[2].demand_fraction = 1.0;
    net.lines.truncate(2);
    net.lines.push(gridopa::grid::Line {
        id: 2,
        from_bus: 0,
        to_bus: 2,
        susceptance: 1.0,
        flow_limit: 10.0,
        in_service: true,
    });
    let s = DcModel::new(&net, opts)
        .and_then(|m| m.dispatch(&net, &[0.0, 0.0, 3.0], &[10.0]))
        .map_err(|e| e.to_string())?;
    ensure(
        (s.flows[2] - 2.0).abs() < 1e-6 && (s.flows[0] - 1.0).abs() < 1e-6 && (s.flows[1] - 1.0).abs() < 1e-6,
        || format!("triangle flows {:?}", s.flows),
    )?;

    let slack = 1e-4;
    let mut on_lattice = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..1000 {
        let inst = random_instance(&mut rng, case >= 700);
        let s = DcModel::new(&inst.network, opts)
            .and_then(|m| m.dispatch(&inst.network, &inst.demand_mw(), &inst.capacity_mw()))
            .map_err(|e| format!("case {case}: {e}"))?;
        residuals(&inst, &s).map_err(|e| format!("case {case}: {e}"))?;
        let w = 100.0 * inst.network.max_marginal_cost().max(1.0);
        let lp = s.cost(&inst.network, &opts);
        let oracle = lattice_dispatch(&inst, w);
        if inst.radial {
            ensure((lp - oracle).abs() <= slack, || {
                format!("radial case {case}: {lp} vs lattice {oracle}")
            })?;
        } else {
            let exact = vertex_dispatch(&inst, w);
            ensure((lp - exact).abs() <= slack && lp <= oracle + slack, || {
                format!("meshed case {case}: {lp} vs vertices {exact}, lattice {oracle}")
            })?;
        }
        if (lp - oracle).abs() <= slack {
            on_lattice += 1;
        }
    }
    Ok(format!(
        "triangle 2:1 split; 1000 instances match brute force ({on_lattice} on the 0.1 MW lattice, the rest meshed optima off it)"
    ))
}

// ---------------------------------------------------------------- 4

fn c4() -> Outcome {
    let net = ring4([12.0, 10.0, 20.0, 20.0], 20.0);
    let demand = [0.0, 0.0, 10.0, 0.0];
    let mut checked = 0;
    for p1 in [0.0, 1.0] {
        let params = CascadeParams {
            p1,
            ..CascadeParams::default()
        };
        for mask in 0u32..16 {
            let triggers: BTreeSet<usize> = (0..4).filter(|l| mask & (1 << l) != 0).collect();
            let path_a = !triggers.contains(&0) && !triggers.contains(&1);
            let path_b = !triggers.contains(&2) && !triggers.contains(&3);
            let mut failed = triggers.clone();
            let mut overloaded = BTreeSet::new();
            let shed = match (path_a, path_b) {
                (_, true) => 0.0,
                (true, false) => {
                    overloaded.insert(1);
                    if p1 == 1.0 {
                        failed.insert(1);
                        10.0
                    } else {
                        0.0
                    }
                }
                (false, false) => 10.0,
            };
            let got = run_cascade(
                &net,
                &demand,
                &[20.0],
                &triggers,
                &params,
                &mut ChaCha8Rng::seed_from_u64(mask as u64),
            )
            .map_err(|e| e.to_string())?;
            ensure(
                got.failed_lines == failed
                    && got.overloaded_lines == overloaded
                    && (got.load_shed - shed).abs() < 1e-9
                    && got.is_blackout == (shed > 0.0),
                || format!("p1 {p1}, triggers {triggers:?}: {got:?}"),
            )?;
            checked += 1;
        }
    }
    Ok(format!("{checked} trigger subsets reach the enumerated fixed points"))
}

// ---------------------------------------------------------------- 5

fn c5() -> Outcome {
    let params = EvolutionParams {
        demand_noise: 0.0,
        ..EvolutionParams::default()
    };
    let profile = DemandProfile::new(vec![100.0; 365]).map_err(|e| e.to_string())?;
    let net = ring4([12.0, 10.0, 20.0, 20.0], 20.0);
    let mut state = SystemState::new(net.clone(), vec![], vec![]).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut peak = 0.0;
    for _ in 0..365 {
        peak = state.advance_day(&profile, &params, &mut rng);
    }
    let want = 100.0 * 1.00005f64.powi(365);
    let rel = (peak - want).abs() / want;
    ensure(rel < 1e-9, || format!("demand {peak} vs {want}"))?;

    let before = state.line_limits();
    let triggers = BTreeSet::from([2]);
    let cascade = CascadeParams {
        p1: 1.0,
        ..CascadeParams::default()
    };
    let result =
        run_cascade(&net, &[0.0, 0.0, 10.0, 0.0], &[20.0], &triggers, &cascade, &mut rng).map_err(|e| e.to_string())?;
    ensure(result.is_blackout, || "expected a blackout".into())?;
    state
        .upgrade_after_blackout(&result, params.mu)
        .map_err(|e| e.to_string())?;
    let involved: BTreeSet<usize> = result.failed_lines.union(&result.overloaded_lines).copied().collect();
    for (l, (b, a)) in before.iter().zip(state.line_limits()).enumerate() {
        let want = if involved.contains(&l) { b * 1.04 } else { *b };
        ensure(a == want, || format!("line {l}: limit {a}, expected {want}"))?;
    }
    Ok(format!(
        "growth over a year {:.6} (relative error {rel:.1e}); lines {involved:?} raised by 1.04",
        peak / 100.0
    ))
}

// ---------------------------------------------------------------- studies

struct Study {
    results: Vec<RealizationResult>,
}

impl Study {
    fn values(&self, f: impl Fn(&RealizationResult) -> f64) -> Vec<f64> {
        self.results.iter().map(f).collect()
    }

    fn risk(&self) -> Vec<f64> {
        self.values(|r| r.normalized_risk.unwrap_or(f64::NAN))
    }

    fn optimal(&self, band: f64) -> &RealizationResult {
        select_optimal(&self.results, band).expect("non-empty study")
    }

    fn coverage_means(&self) -> (f64, f64) {
        let mut months = vec![CoverageHistogram::default(); 12];
        for r in &self.results {
            for (m, h) in months.iter_mut().zip(&r.stats.monthly_coverage) {
                m.merge(h);
            }
        }
        (
            pooled(&months, WINTER_MONTHS).mean(),
            pooled(&months, SUMMER_MONTHS).mean(),
        )
    }
}

fn config(pen: f64, n: usize) -> ScenarioConfig {
    ScenarioConfig {
        name: format!("acceptance-{pen}-{n}"),
        penetration: pen,
        n_res_plants: n,
        horizon_days: DAYS,
        realizations: REALIZATIONS,
        ..ScenarioConfig::default()
    }
}

fn run(base: &Scenario, cfg: ScenarioConfig, reference: f64) -> Result<Study, String> {
    let t = Instant::now();
    let label = cfg.name.clone();
    let scenario = base.reconfigured(cfg).map_err(|e| e.to_string())?;
    let mut results = scenario.monte_carlo().map_err(|e| e.to_string())?;
    normalize_all(&mut results, reference).map_err(|e| e.to_string())?;
    eprintln!("  {label}: {:.0?}", t.elapsed());
    Ok(Study { results })
}

struct Studies {
    base: Scenario,
    baseline: Study,
    reference: f64,
    by_n: Vec<(usize, Study)>,
}

impl Studies {
    fn new() -> Result<Self, String> {
        let base = Scenario::with_network(
            config(0.3, 10),
            gridopa::reference::balearic_like().map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        let t = Instant::now();
        let baseline = base
            .baseline()
            .and_then(|b| b.monte_carlo())
            .map_err(|e| e.to_string())?;
        eprintln!("  baseline: {:.0?}", t.elapsed());
        let reference = mean_raw_risk(&baseline).map_err(|e| e.to_string())?;
        let mut by_n = Vec::new();
        for n in [1, 2, 10, 40, 60] {
            by_n.push((n, run(&base, config(0.3, n), reference)?));
        }
        Ok(Self {
            base,
            baseline: Study { results: baseline },
            reference,
            by_n,
        })
    }

    fn n(&self, n: usize) -> &Study {
        &self.by_n.iter().find(|(k, _)| *k == n).expect("study ran").1
    }

    fn band(&self) -> f64 {
        self.base.config.selection_band
    }
}

// ---------------------------------------------------------------- 6

fn c6(s: &Studies) -> Outcome {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in &s.baseline.results {
        for &m in r.stats.annual_margins.iter().skip(10) {
            lo = lo.min(m);
            hi = hi.max(m);
        }
    }
    ensure(lo.is_finite(), || "no annual margins after year 10".into())?;
    ensure((0.35..=0.55).contains(&lo) && (0.35..=0.55).contains(&hi), || {
        format!("annual margins after year 10 span [{lo:.4}, {hi:.4}]")
    })?;
    Ok(format!(
        "{} baseline runs keep annual margins in [{lo:.4}, {hi:.4}]",
        s.baseline.results.len()
    ))
}

// ---------------------------------------------------------------- 7

fn c7(s: &Studies) -> Outcome {
    let one = s.n(1).risk();
    let ten = s.n(10).risk();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut resample = |v: &[f64]| -> f64 {
        let draw: Vec<f64> = (0..v.len()).map(|_| v[rng.random_range(0..v.len())]).collect();
        median(&draw)
    };
    let rounds = 1000;
    let wins = (0..rounds).filter(|_| resample(&one) > resample(&ten)).count();
    let share = wins as f64 / rounds as f64;
    let stds: Vec<(usize, f64)> = [1, 2, 10, 60]
        .iter()
        .map(|&n| (n, mean_std(&s.n(n).values(|r| r.stats.performance)).1))
        .collect();
    let detail = format!(
        "median risk n=1 {:.3} vs n=10 {:.3}, bootstrap share {share:.3}; performance std {}",
        median(&one),
        median(&ten),
        stds.iter()
            .map(|(n, sd)| format!("n={n} {sd:.5}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    let monotone = stds.windows(2).all(|w| w[1].1 < w[0].1);
    if share >= 0.9 && monotone {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 8

fn c8(s: &Studies) -> Outcome {
    let one = s.n(1).optimal(s.band()).stats.stress;
    let forty = s.n(40).optimal(s.band()).stats.stress;
    let detail = format!(
        "optimal stress n=1 {one:.4}, n=40 {forty:.4} (ratio {:.3})",
        forty / one
    );
    if forty <= 0.95 * one {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 9, 10

fn frozen(s: &Studies, pen: f64) -> ScenarioConfig {
    let placement = s.n(10).optimal(s.band()).placement.clone();
    ScenarioConfig {
        placement: Placement::Explicit(placement),
        ..config(pen, 10)
    }
}

fn c9(s: &Studies, high: &Study) -> Outcome {
    let low = run(&s.base, frozen(s, 0.2), s.reference)?;
    let r_low = mean_std(&low.risk()).0;
    let r_high = mean_std(&high.risk()).0;
    let (winter, summer) = s.n(10).coverage_means();
    let detail = format!(
        "normalized risk at 0.2 {r_low:.3}, at 0.6 {r_high:.3}; coverage mean winter {winter:.3}, summer {summer:.3}"
    );
    if r_high > r_low && winter < summer {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c10(s: &Studies, plain: &Study) -> Outcome {
    let doubled = run(
        &s.base,
        ScenarioConfig {
            winter_doubled: true,
            critical_margin: 0.6,
            ..frozen(s, 0.6)
        },
        s.reference,
    )?;
    let with = mean_std(&doubled.risk()).0;
    let without = mean_std(&plain.risk()).0;
    let paired = doubled
        .results
        .iter()
        .zip(&plain.results)
        .filter(|(a, b)| {
            assert_eq!(a.seed, b.seed);
            a.normalized_risk < b.normalized_risk
        })
        .count();
    let detail = format!(
        "normalized risk with doubling {with:.3}, without {without:.3}; lower in {paired}/{} seed pairs",
        plain.results.len()
    );
    if with < without {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 11

fn fingerprint(results: &[RealizationResult]) -> String {
    format!("{results:?}")
}

fn c11(s: &Studies) -> Outcome {
    let cfg = ScenarioConfig {
        horizon_days: 3000,
        realizations: 6,
        ..config(0.3, 10)
    };
    let scenario = s.base.reconfigured(cfg).map_err(|e| e.to_string())?;
    let a = scenario.run_all(false).map_err(|e| e.to_string())?;
    let b = scenario.run_all(false).map_err(|e| e.to_string())?;
    ensure(fingerprint(&a) == fingerprint(&b), || {
        "sequential re-run differs".into()
    })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .map_err(|e| e.to_string())?;
    let c = pool.install(|| scenario.run_all(true)).map_err(|e| e.to_string())?;
    ensure(fingerprint(&a) == fingerprint(&c), || {
        "parallel run differs from sequential".into()
    })?;

    let study = s.n(10);
    let again = s.base.reconfigured(config(0.3, 10)).map_err(|e| e.to_string())?;
    let mut r = again.run_realization(3).map_err(|e| e.to_string())?;
    r.normalized_risk = study.results[3].normalized_risk;
    ensure(fingerprint(&[r]) == fingerprint(&study.results[3..4]), || {
        "full-length re-run differs".into()
    })?;
    Ok("bit-identical re-runs; 4-thread and sequential runs agree".into())
}

// ---------------------------------------------------------------- driver

fn report(id: usize, outcome: &Outcome) {
    match outcome {
        Ok(d) => println!("C{id} PASS  {d}"),
        Err(d) => println!("C{id} FAIL  {d}"),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    // libtest-style name filters
    let skipped = args
        .windows(2)
        .any(|w| w[0] == "--skip" && "acceptance".contains(w[1].as_str()));
    let filters: Vec<&String> = args
        .iter()
        .enumerate()
        .filter(|(i, a)| !a.starts_with('-') && (*i == 0 || args[i - 1] != "--skip"))
        .map(|(_, a)| a)
        .collect();
    if skipped || (!filters.is_empty() && !filters.iter().any(|f| "acceptance".contains(f.as_str()))) {
        println!("acceptance: skipped");
        return ExitCode::SUCCESS;
    }
    let start = Instant::now();
    let mut hard_failures = 0;
    let mut results: Vec<(usize, Outcome, bool)> = Vec::new();
    for (id, f) in [(1, c1 as fn() -> Outcome), (2, c2), (3, c3), (4, c4), (5, c5)] {
        let o = f();
        report(id, &o);
        results.push((id, o, true));
    }

    eprintln!("running Monte Carlo studies ({REALIZATIONS} x {DAYS} days)");
    match Studies::new() {
        Ok(s) => {
            let high = run(&s.base, frozen(&s, 0.6), s.reference);
            let trend: Vec<(usize, Outcome)> = vec![
                (6, c6(&s)),
                (7, c7(&s)),
                (8, c8(&s)),
                (9, high.as_ref().map_err(Clone::clone).and_then(|h| c9(&s, h))),
                (10, high.as_ref().map_err(Clone::clone).and_then(|h| c10(&s, h))),
            ];
            for (id, o) in trend {
                report(id, &o);
                results.push((id, o, false));
            }
            let o = c11(&s);
            report(11, &o);
            results.push((11, o, true));
        }
        Err(e) => {
            for id in 6..=11 {
                let o = Err(format!("studies did not run: {e}"));
                report(id, &o);
                results.push((id, o, id == 11));
            }
        }
    }

    let passed = results.iter().filter(|r| r.1.is_ok()).count();
    for (_, o, hard) in &results {
        if *hard && o.is_err() {
            hard_failures += 1;
        }
    }
    println!("{passed}/{} criteria pass in {:.0?}", results.len(), start.elapsed());
    if hard_failures > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

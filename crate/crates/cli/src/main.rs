mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use gridopa::io::load_series;
use gridopa::res::{plan_outflow, MONTH_LENGTHS};
use gridopa::scenario::{mean_raw_risk, normalize_all, select_optimal, sweep, Scenario, SweepConfig};

use report::{coverage_rows, emit, summary, write_rows, Figure, RealizationRow};

#[derive(Parser)]
#[command(
    name = "gridopa",
    version,
    about = "Cascading-blackout grid simulator with renewable plants and storage"
)]
struct Cli {
    /// Worker threads for Monte Carlo runs (defaults to all cores).
    #[arg(long, env = "GRIDOPA_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan monthly outflow levels and storage for a 365-day production series.
    PlanStorage {
        /// CSV with a header line; the last column is the daily production.
        series: PathBuf,
    },
    /// Run one realization and print its statistics.
    Simulate {
        scenario: PathBuf,
        /// Realization index; the RNG seed is derived from it and master_seed.
        #[arg(long, default_value_t = 0)]
        seed: usize,
        #[arg(long)]
        horizon_days: Option<u64>,
        /// Write one CSV row per simulated day.
        #[arg(long)]
        day_log: Option<PathBuf>,
    },
    /// Run all realizations of a scenario against its zero-renewable baseline.
    Montecarlo {
        scenario: PathBuf,
        #[arg(long)]
        realizations: Option<usize>,
        #[arg(long)]
        horizon_days: Option<u64>,
        /// Per-realization CSV (stdout if absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Monthly coverage histograms pooled over realizations.
        #[arg(long)]
        coverage_out: Option<PathBuf>,
    },
    /// Run a parameter grid and print one aggregate row per point.
    Sweep {
        sweep: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert result tables into plot-ready columns.
    EmitPlots {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(long, value_enum)]
        figure: Figure,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn load_scenario(path: &Path, realizations: Option<usize>, horizon: Option<u64>) -> Result<Scenario> {
    let scenario = Scenario::load(path)?;
    let mut config = scenario.config.clone();
    if let Some(n) = realizations {
        config.realizations = n;
    }
    if let Some(h) = horizon {
        config.horizon_days = h;
    }
    if config == scenario.config {
        Ok(scenario)
    } else {
        Ok(scenario.reconfigured(config)?)
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("thread count must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::PlanStorage { series } => {
            let p_in = load_series(&series)?;
            if p_in.len() != 365 {
                bail!("{}: expected 365 daily values, found {}", series.display(), p_in.len());
            }
            let plan = plan_outflow(&p_in, &MONTH_LENGTHS)?;
            let mut out = output(None)?;
            writeln!(out, "month,level")?;
            for (m, level) in plan.monthly_levels.iter().enumerate() {
                writeln!(out, "{},{level}", m + 1)?;
            }
            writeln!(out, "# delivered_energy {}", plan.delivered_energy)?;
            writeln!(out, "# mean_outflow {}", plan.mean_outflow(&MONTH_LENGTHS))?;
            writeln!(out, "# required_storage {}", plan.required_storage)?;
            writeln!(out, "# storage_days {}", plan.storage_days(&MONTH_LENGTHS))?;
            out.flush()?;
        }
        Command::Simulate {
            scenario,
            seed,
            horizon_days,
            day_log,
        } => {
            let scenario = load_scenario(&scenario, None, horizon_days)?;
            let mut log = match &day_log {
                Some(p) => Some(csv::Writer::from_path(p).with_context(|| format!("creating {}", p.display()))?),
                None => None,
            };
            let mut log_error = None;
            let result = scenario.run_realization_logged(seed, |day| {
                if let (Some(w), None) = (log.as_mut(), &log_error) {
                    if let Err(e) = w.serialize(day) {
                        log_error = Some(e);
                    }
                }
            })?;
            if let Some(e) = log_error {
                return Err(e.into());
            }
            if let Some(mut w) = log {
                w.flush()?;
            }
            let s = &result.stats;
            let mut out = output(None)?;
            writeln!(out, "seed {}", result.seed)?;
            writeln!(out, "placement {:?}", result.placement)?;
            writeln!(out, "days {}", s.horizon_days)?;
            writeln!(out, "performance {}", s.performance)?;
            writeln!(out, "stress {}", s.stress)?;
            writeln!(out, "risk_raw {}", s.risk_raw)?;
            writeln!(out, "blackouts_per_year {}", s.blackout_frequency)?;
            writeln!(out, "cascade_blackouts {}", s.cascade_blackouts)?;
            writeln!(out, "shortfall_blackouts {}", s.shortfall_blackouts)?;
            if let Some(m) = s.annual_margins.last() {
                writeln!(out, "final_annual_margin {m}")?;
            }
            out.flush()?;
        }
        Command::Montecarlo {
            scenario,
            realizations,
            horizon_days,
            out,
            coverage_out,
        } => {
            let scenario = load_scenario(&scenario, realizations, horizon_days)?;
            let baseline = scenario.baseline()?.monte_carlo()?;
            let reference = mean_raw_risk(&baseline)?;
            let mut results = scenario.monte_carlo()?;
            normalize_all(&mut results, reference)?;
            let optimal = select_optimal(&results, scenario.config.selection_band)?.index;
            let rows: Vec<RealizationRow> = results
                .iter()
                .map(|r| RealizationRow::new(&scenario.config, r, r.index == optimal))
                .collect();
            write_rows(&rows, output(out.as_deref())?)?;
            if let Some(p) = coverage_out {
                write_rows(&coverage_rows(&results), output(Some(&p))?)?;
            }
            eprintln!("{}  optimal index {optimal}", summary(&results));
        }
        Command::Sweep { sweep: path, out } => {
            let (config, scenario) = SweepConfig::load(&path)?;
            let rows = sweep(&config, &scenario)?;
            write_rows(&rows, output(out.as_deref())?)?;
        }
        Command::EmitPlots { results, figure, out } => {
            emit(figure, &results, output(out.as_deref())?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

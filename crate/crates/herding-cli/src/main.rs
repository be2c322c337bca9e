//! `herd`: run herding simulations, sweep outcome grids, self-validate.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use herding::metrics::Classification;
use herding::{simulator, sweep, validate, RunLog, SimConfig, SweepSpec};

#[derive(Parser)]
#[command(name = "herd", version, about = "Herding simulation engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single simulation and write trajectory, metrics and plot data.
    Run {
        /// JSON configuration file ("{}" selects the standard scenario).
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Record decimation for trajectory/plot output (default from the
        /// config's output_stride).
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Run a grid of simulations and write per-cell metrics plus an
    /// aggregate CSV table.
    Sweep {
        /// JSON sweep specification.
        #[arg(long)]
        spec: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Parallel cell executions (defaults to the number of cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run the built-in oracle and property suites.
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            out,
            stride,
        } => cmd_run(&config, &out, stride),
        Command::Sweep { spec, out, jobs } => cmd_sweep(&spec, &out, jobs),
        Command::Validate => cmd_validate(),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn seed_override() -> Result<Option<u64>> {
    match std::env::var("HERD_SEED") {
        Ok(text) => {
            let seed = text
                .trim()
                .parse::<u64>()
                .with_context(|| format!("HERD_SEED must be an unsigned integer, got {text:?}"))?;
            Ok(Some(seed))
        }
        Err(_) => Ok(None),
    }
}

fn cmd_run(config_path: &Path, out_dir: &Path, stride: Option<usize>) -> Result<ExitCode> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let mut cfg: SimConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", config_path.display()))?;
    if let Some(seed) = seed_override()? {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let stride = stride.unwrap_or(cfg.output_stride).max(1);

    let log = simulator::run(&cfg)?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    std::fs::write(out_dir.join("trajectory.csv"), log.to_csv(stride))?;
    std::fs::write(
        out_dir.join("plot.json"),
        serde_json::to_string(&plot_data(&log, stride))?,
    )?;

    if let Some(cause) = &log.abort {
        bail!("{cause}");
    }

    let report = herding::metrics::classify_with_fallback(
        &log,
        cfg.reference.t_switch,
        cfg.t_end,
        &cfg.thresholds,
    )?;
    std::fs::write(
        out_dir.join("metrics.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    println!(
        "classification={} l_mu={} m l_sigma={} m^2 escapes={}",
        report.classification, report.l_mu_m, report.l_sigma_m2, report.escape_count
    );
    Ok(match report.classification {
        Classification::Success | Classification::CoalitionLoss => ExitCode::SUCCESS,
        Classification::Failure => ExitCode::from(2),
    })
}

/// Decimated trajectories in one JSON document for external plotting.
fn plot_data(log: &RunLog, stride: usize) -> serde_json::Value {
    let records: Vec<_> = log.records.iter().step_by(stride).collect();
    serde_json::json!({
        "dt": log.dt,
        "stride": stride,
        "times": records.iter().map(|r| r.time).collect::<Vec<_>>(),
        "reference": records
            .iter()
            .map(|r| [r.reference.position.x, r.reference.position.y])
            .collect::<Vec<_>>(),
        "evaders": records
            .iter()
            .map(|r| r.evaders.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "herders": records
            .iter()
            .map(|r| r.herders.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "selected": records.iter().map(|r| r.selected.clone()).collect::<Vec<_>>(),
    })
}

fn cmd_sweep(spec_path: &Path, out_dir: &Path, jobs: Option<usize>) -> Result<ExitCode> {
    let text = std::fs::read_to_string(spec_path)
        .with_context(|| format!("reading {}", spec_path.display()))?;
    let mut spec: SweepSpec = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", spec_path.display()))?;
    if let Some(seed) = seed_override()? {
        spec.base.seed = seed;
    }
    spec.validate()?;

    let outcomes = match jobs {
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.max(1))
                .build()
                .context("building worker pool")?;
            pool.install(|| sweep::run_sweep(&spec))?
        }
        None => sweep::run_sweep(&spec)?,
    };

    let cells_dir = out_dir.join("cells");
    std::fs::create_dir_all(&cells_dir)
        .with_context(|| format!("creating {}", cells_dir.display()))?;
    for cell in &outcomes {
        let name = format!("m{}_n{}_{}_s{}.json", cell.m, cell.n, cell.mix, cell.seed);
        std::fs::write(cells_dir.join(name), serde_json::to_string_pretty(cell)?)?;
    }
    std::fs::write(out_dir.join("results.csv"), sweep::aggregate_csv(&outcomes))?;

    let errors = outcomes.iter().filter(|c| c.error.is_some()).count();
    let successes = outcomes
        .iter()
        .filter(|c| c.report.map(|r| r.classification) == Some(Classification::Success))
        .count();
    println!(
        "{} cells: {} Success, {} errors, table in {}",
        outcomes.len(),
        successes,
        errors,
        out_dir.join("results.csv").display()
    );
    Ok(if errors == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_validate() -> Result<ExitCode> {
    let checks = validate::run_all_checks();
    let mut all_pass = true;
    for check in &checks {
        let status = if check.pass { "PASS" } else { "FAIL" };
        println!("{status}  {} ({})", check.name, check.detail);
        all_pass &= check.pass;
    }
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;
use wpcn_core::baseline::era_optimize;
use wpcn_core::experiments::{self, SweepAxes, PRESETS};
use wpcn_core::optimizer::ORACLE_MAX_USERS;
use wpcn_core::{
    decode_schedule, oracle_grid_search, sample_channel, solve, ChannelRealization,
    MeasuredEnergies, ProblemInstance, SolveOptions, SolveResult, SolveStatus, WpcnError,
};

use crate::config::{ConfigEcho, FileConfig};

#[derive(Parser)]
#[command(name = "wpcn", version, about = "Uplink scheduling by downlink power level modulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one channel realization with the proposed scheme and the equal split.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Random restarts of the split search.
        #[arg(long, default_value_t = SolveOptions::default().restarts)]
        restarts: usize,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover the uplink fractions from measured subslot energies.
    Decode {
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        energies: Vec<f64>,
        #[arg(long)]
        alpha: f64,
    },
    /// Exhaustive grid search, K ≤ 3 only.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[arg(long, default_value_t = 100)]
        resolution: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo sweep of a preset, written as CSV.
    Sweep {
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = experiments::DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        base_seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the JSON document here.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Base parameters and axes for `--preset custom`.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Worker threads. Results do not depend on it.
        #[arg(long, env = "WPCN_WORKERS")]
        workers: Option<usize>,
    },
    /// List the built-in presets with their parameters.
    Presets,
}

/// Exit code 1 covers bad input, 2 a solver that could not deliver.
enum Failure {
    Input(anyhow::Error),
    Solver(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<WpcnError>() {
            Some(WpcnError::SolverFailure { .. }) => Failure::Solver(e),
            _ => Failure::Input(e),
        }
    }
}

impl From<WpcnError> for Failure {
    fn from(e: WpcnError) -> Self {
        Failure::from(anyhow::Error::new(e))
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => print_line(&text)?,
    }
    Ok(())
}

/// A closed pipe downstream (`| head`) is not an error.
fn print_line(text: &str) -> anyhow::Result<()> {
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

#[derive(Serialize)]
struct SolveReport {
    config: ConfigEcho,
    seed: u64,
    trial: u64,
    channel: ChannelRealization,
    proposed: SolveResult,
    era: SolveResult,
    gain_nats: f64,
}

fn load(path: &Path) -> Result<(FileConfig, wpcn_core::SystemConfig), Failure> {
    let file = FileConfig::load(path)?;
    let cfg = file.system_config()?;
    Ok((file, cfg))
}

fn run_solve(config: &Path, seed: u64, trial: u64, restarts: usize, out: Option<&Path>) -> Result<(), Failure> {
    let (_, cfg) = load(config)?;
    let channel = sample_channel(&cfg.topology, seed, trial)?;
    let era = era_optimize(&channel, &cfg)?;
    // Without modulation the equal split is the only schedule the users can learn.
    let proposed = if cfg.alpha == 0.0 {
        era.clone()
    } else {
        let problem = ProblemInstance::new(channel.clone(), cfg.clone())?;
        solve(&problem, &SolveOptions { restarts, ..SolveOptions::default() })?
    };
    let status = proposed.status;
    emit(
        &SolveReport {
            config: ConfigEcho::new(&cfg),
            seed,
            trial,
            channel,
            gain_nats: proposed.objective - era.objective,
            proposed,
            era,
        },
        out,
    )?;
    if status == SolveStatus::Infeasible {
        return Err(Failure::Solver(anyhow!("solver found no feasible point")));
    }
    Ok(())
}

fn run_oracle(config: &Path, seed: u64, trial: u64, resolution: usize, out: Option<&Path>) -> Result<(), Failure> {
    let (_, cfg) = load(config)?;
    if cfg.users() > ORACLE_MAX_USERS {
        return Err(WpcnError::OracleTooLarge { users: cfg.users() }.into());
    }
    let channel = sample_channel(&cfg.topology, seed, trial)?;
    let problem = ProblemInstance::new(channel, cfg.clone())?;
    let result = oracle_grid_search(&problem, resolution)?;
    #[derive(Serialize)]
    struct Report<'a> {
        config: ConfigEcho,
        seed: u64,
        trial: u64,
        resolution: usize,
        channel: &'a ChannelRealization,
        oracle: &'a SolveResult,
    }
    emit(
        &Report {
            config: ConfigEcho::new(&cfg),
            seed,
            trial,
            resolution,
            channel: &problem.channel,
            oracle: &result,
        },
        out,
    )?;
    Ok(())
}

fn run_decode(energies: Vec<f64>, alpha: f64) -> Result<(), Failure> {
    let fractions = decode_schedule(&MeasuredEnergies::new(energies)?, alpha)?;
    let text: Vec<String> = fractions.as_slice().iter().map(f64::to_string).collect();
    print_line(&text.join(","))?;
    Ok(())
}

struct SweepArgs {
    preset: String,
    trials: usize,
    base_seed: u64,
    out: PathBuf,
    json: Option<PathBuf>,
    config: Option<PathBuf>,
    workers: Option<usize>,
}

fn run_sweep(args: SweepArgs) -> Result<(), Failure> {
    let mut spec = experiments::preset(&args.preset, args.trials, args.base_seed)?;
    match (&args.config, args.preset.as_str()) {
        (Some(path), "custom") => {
            let (file, cfg) = load(path)?;
            spec.axes = SweepAxes {
                users: file.sweep_k.clone().unwrap_or_else(|| vec![cfg.users()]),
                alpha: file.sweep_alpha.clone().unwrap_or_else(|| vec![cfg.alpha]),
                ppr: file
                    .sweep_ppr
                    .clone()
                    .unwrap_or_else(|| vec![cfg.peak_power / cfg.avg_power]),
            };
            if let Some(fill) = file.fill_distance {
                spec.fill_distance = fill;
            }
            spec.base_config = cfg;
            spec.validate().map_err(config::rename_fields)?;
        }
        (Some(_), _) => {
            return Err(Failure::Input(anyhow!("--config is only used with --preset custom")));
        }
        (None, _) => {}
    }
    if args.workers == Some(0) {
        return Err(Failure::Input(anyhow!("--workers must be at least 1")));
    }
    let result = experiments::run_sweep(&spec, args.workers)?;
    let file = File::create(&args.out).with_context(|| format!("cannot write {}", args.out.display()))?;
    experiments::write_csv(&result, BufWriter::new(file))?;
    if let Some(path) = &args.json {
        let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
        let mut w = BufWriter::new(file);
        experiments::write_json(&result, &mut w)?;
        w.write_all(b"\n").context("cannot write json")?;
    }
    eprintln!("wrote {} rows to {}", result.rows.len(), args.out.display());
    Ok(())
}

fn run_presets() -> Result<(), Failure> {
    #[derive(Serialize)]
    struct Listing {
        name: &'static str,
        config: ConfigEcho,
        axes: SweepAxes,
        fill_distance: f64,
        default_trials: usize,
    }
    let listing: Vec<Listing> = PRESETS
        .iter()
        .map(|&name| {
            let spec = experiments::preset(name, experiments::DEFAULT_TRIALS, 1)?;
            Ok(Listing {
                name,
                config: ConfigEcho::new(&spec.base_config),
                axes: spec.axes,
                fill_distance: spec.fill_distance,
                default_trials: spec.trials,
            })
        })
        .collect::<Result<_, WpcnError>>()?;
    emit(&listing, None)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve {
            config,
            seed,
            trial,
            restarts,
            out,
        } => run_solve(&config, seed, trial, restarts, out.as_deref()),
        Command::Decode { energies, alpha } => run_decode(energies, alpha),
        Command::Oracle {
            config,
            seed,
            trial,
            resolution,
            out,
        } => run_oracle(&config, seed, trial, resolution, out.as_deref()),
        Command::Sweep {
            preset,
            trials,
            base_seed,
            out,
            json,
            config,
            workers,
        } => run_sweep(SweepArgs {
            preset,
            trials,
            base_seed,
            out,
            json,
            config,
            workers,
        }),
        Command::Presets => run_presets(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("solver failure: {e:#}");
            ExitCode::from(2)
        }
    }
}

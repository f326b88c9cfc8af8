//! Monte Carlo sweeps comparing the optimized schedule with the equal split.
//!
//! Trial `t` of every grid point sees the channel drawn from `(base_seed, t)`,
//! so rows are paired. Results are collected in grid order and summed with
//! compensation, which keeps the output independent of the worker count.

use std::io::Write;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::era_optimize;
use crate::channel::{sample_channel, Topology};
use crate::error::{Result, WpcnError};
use crate::optimizer::{solve, ProblemInstance, SolveOptions, SolveStatus};
use crate::physics::{dbm_to_watt, SystemConfig};

pub const PRESETS: [&str; 4] = ["fig4", "fig5", "fig6", "custom"];
pub const DEFAULT_TRIALS: usize = 200;

/// Values swept over. Every combination is one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxes {
    pub users: Vec<usize>,
    pub alpha: Vec<f64>,
    /// Peak-to-average power ratios `P_P / P_A`.
    pub ppr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub preset: String,
    /// Everything but `K`, `α` and `P_P`, which come from the axes. Its
    /// distances are the first users' distances.
    pub base_config: SystemConfig,
    pub axes: SweepAxes,
    /// Distance of users added beyond the base distances, meters.
    pub fill_distance: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub options: SolveOptions,
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub users: usize,
    pub alpha: f64,
    pub ppr: f64,
}

impl SweepPoint {
    fn label(&self, preset: &str) -> String {
        format!("{preset} K={} ppr={} alpha={}", self.users, self.ppr, self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub proposed: f64,
    pub era: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointTrials {
    pub point: SweepPoint,
    pub outcomes: Vec<TrialOutcome>,
}

/// One output row. Field names are the CSV header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub preset: String,
    #[serde(rename = "K")]
    pub users: usize,
    pub ppr: f64,
    pub alpha: f64,
    pub mean_proposed_nats: f64,
    pub se_proposed: f64,
    pub mean_era_nats: f64,
    pub se_era: f64,
    pub trials: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
}

fn preset_config(distances: Vec<f64>) -> SystemConfig {
    let k = distances.len();
    let pa = dbm_to_watt(20.0);
    SystemConfig {
        avg_power: pa,
        peak_power: 4.0 * pa,
        alpha: 0.3,
        eta: 0.5,
        noise_power: dbm_to_watt(-160.0),
        circuit_power: vec![0.0; k],
        energy_budget: None,
        topology: Topology {
            distances,
            path_loss_exponent: 2.0,
        },
    }
}

/// Built-in sweep by name. `custom` starts from the fig4 parameters with a
/// single grid point; callers replace what they need.
pub fn preset(name: &str, trials: usize, base_seed: u64) -> Result<SweepSpec> {
    let (base, axes, fill) = match name {
        "fig4" => (
            preset_config(vec![5.0, 10.0, 15.0, 10.0, 10.0]),
            SweepAxes {
                users: vec![5],
                alpha: vec![0.3, 0.5, 1.0],
                ppr: (0..=14).map(|i| 1.0 + 0.5 * i as f64).collect(),
            },
            10.0,
        ),
        "fig5" | "fig6" => (
            preset_config(vec![5.0, 10.0, 15.0]),
            SweepAxes {
                users: vec![3, 5, 10],
                alpha: vec![0.3],
                ppr: vec![4.0],
            },
            if name == "fig5" { 15.0 } else { 10.0 },
        ),
        "custom" => (
            preset_config(vec![5.0, 10.0, 15.0, 10.0, 10.0]),
            SweepAxes {
                users: vec![5],
                alpha: vec![0.3],
                ppr: vec![4.0],
            },
            10.0,
        ),
        _ => {
            return Err(WpcnError::UnknownPreset {
                name: name.to_string(),
                known: PRESETS.join(", "),
            })
        }
    };
    let spec = SweepSpec {
        preset: name.to_string(),
        base_config: base,
        axes,
        fill_distance: fill,
        trials,
        base_seed,
        options: SolveOptions::default(),
    };
    spec.validate()?;
    Ok(spec)
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(WpcnError::config("trials", "must be at least 1"));
        }
        let axes = &self.axes;
        if axes.users.is_empty() || axes.alpha.is_empty() || axes.ppr.is_empty() {
            return Err(WpcnError::config("axes", "every sweep axis needs at least one value"));
        }
        if axes.users.contains(&0) {
            return Err(WpcnError::config("K", "must be at least 1"));
        }
        if let Some(a) = axes.alpha.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
            return Err(WpcnError::config("alpha", format!("sweep values must lie in (0, 1], got {a}")));
        }
        if let Some(r) = axes.ppr.iter().find(|r| !(r.is_finite() && **r >= 1.0)) {
            return Err(WpcnError::config("ppr", format!("sweep values must be at least 1, got {r}")));
        }
        if !(self.fill_distance.is_finite() && self.fill_distance > 0.0) {
            return Err(WpcnError::config("fill_distance", "must be positive"));
        }
        for point in self.points() {
            self.config_for(&point).validate()?;
        }
        Ok(())
    }

    /// Grid points in output order: `K`, then `α`, then `P_P / P_A`.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &users in &self.axes.users {
            for &alpha in &self.axes.alpha {
                for &ppr in &self.axes.ppr {
                    out.push(SweepPoint { users, alpha, ppr });
                }
            }
        }
        out
    }

    /// Distances for `users` users: the base distances, truncated or padded
    /// with the fill distance.
    pub fn distances(&self, users: usize) -> Vec<f64> {
        let base = &self.base_config.topology.distances;
        (0..users)
            .map(|i| base.get(i).copied().unwrap_or(self.fill_distance))
            .collect()
    }

    pub fn config_for(&self, point: &SweepPoint) -> SystemConfig {
        let mut cfg = self.base_config.clone();
        let k = point.users;
        cfg.topology.distances = self.distances(k);
        cfg.circuit_power = (0..k)
            .map(|i| {
                let base = &self.base_config.circuit_power;
                base.get(i).or(base.last()).copied().unwrap_or(0.0)
            })
            .collect();
        cfg.alpha = point.alpha;
        cfg.peak_power = point.ppr * cfg.avg_power;
        cfg
    }
}

/// Solves one trial of one grid point.
pub fn run_trial(spec: &SweepSpec, point: &SweepPoint, trial: u64) -> Result<TrialOutcome> {
    let fail = |reason: String| WpcnError::SolverFailure {
        point: point.label(&spec.preset),
        trial,
        base_seed: spec.base_seed,
        reason,
    };
    let cfg = spec.config_for(point);
    let channel = sample_channel(&cfg.topology, spec.base_seed, trial)?;
    let era = era_optimize(&channel, &cfg).map_err(|e| fail(e.to_string()))?;
    let problem = ProblemInstance::new(channel, cfg)?;
    let proposed = solve(&problem, &spec.options).map_err(|e| fail(e.to_string()))?;
    if proposed.status == SolveStatus::Infeasible {
        return Err(fail(format!(
            "solver returned an infeasible point (max residual {:e})",
            proposed.max_residual
        )));
    }
    Ok(TrialOutcome {
        proposed: proposed.objective,
        era: era.objective,
    })
}

fn run_jobs(spec: &SweepSpec, jobs: &[(usize, u64)], points: &[SweepPoint]) -> Vec<Result<TrialOutcome>> {
    let job = |&(p, t): &(usize, u64)| run_trial(spec, &points[p], t);
    #[cfg(feature = "parallel")]
    {
        jobs.par_iter().map(job).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.iter().map(job).collect()
    }
}

/// Every trial of every grid point, in grid order. `workers` bounds the thread
/// count (`None` uses the default pool) and never changes the result.
pub fn sweep_trials(spec: &SweepSpec, workers: Option<usize>) -> Result<Vec<PointTrials>> {
    spec.validate()?;
    let points = spec.points();
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| (0..spec.trials as u64).map(move |t| (p, t)))
        .collect();

    #[cfg(feature = "parallel")]
    let results = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| WpcnError::domain(format!("cannot start {n} workers: {e}")))?
            .install(|| run_jobs(spec, &jobs, &points)),
        None => run_jobs(spec, &jobs, &points),
    };
    #[cfg(not(feature = "parallel"))]
    let results = {
        let _ = workers;
        run_jobs(spec, &jobs, &points)
    };

    let mut results = results.into_iter();
    points
        .into_iter()
        .map(|point| {
            let outcomes = results.by_ref().take(spec.trials).collect::<Result<Vec<_>>>()?;
            Ok(PointTrials { point, outcomes })
        })
        .collect()
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Sample mean and its standard error (zero for a single sample).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = compensated_sum(values.iter().map(|v| (v - mean).powi(2))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn summarize(spec: &SweepSpec, trials: &PointTrials) -> SweepRow {
    let proposed: Vec<f64> = trials.outcomes.iter().map(|o| o.proposed).collect();
    let era: Vec<f64> = trials.outcomes.iter().map(|o| o.era).collect();
    let (mean_proposed_nats, se_proposed) = mean_and_se(&proposed);
    let (mean_era_nats, se_era) = mean_and_se(&era);
    SweepRow {
        preset: spec.preset.clone(),
        users: trials.point.users,
        ppr: trials.point.ppr,
        alpha: trials.point.alpha,
        mean_proposed_nats,
        se_proposed,
        mean_era_nats,
        se_era,
        trials: trials.outcomes.len(),
        base_seed: spec.base_seed,
    }
}

pub fn run_sweep(spec: &SweepSpec, workers: Option<usize>) -> Result<SweepResult> {
    let trials = sweep_trials(spec, workers)?;
    Ok(SweepResult {
        spec: spec.clone(),
        rows: trials.iter().map(|t| summarize(spec, t)).collect(),
    })
}

pub fn write_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in &result.rows {
        writer.serialize(row).map_err(|e| WpcnError::Io(e.to_string()))?;
    }
    writer.flush().map_err(|e| WpcnError::Io(e.to_string()))
}

/// JSON document with the rows and the full spec, including the distance
/// profile of every `K`.
pub fn write_json<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let distances: Vec<serde_json::Value> = result
        .spec
        .axes
        .users
        .iter()
        .map(|&k| serde_json::json!({ "K": k, "distances_m": result.spec.distances(k) }))
        .collect();
    let doc = serde_json::json!({
        "preset": result.spec.preset,
        "trials": result.spec.trials,
        "base_seed": result.spec.base_seed,
        "spec": result.spec,
        "distance_profiles": distances,
        "rows": result.rows,
    });
    serde_json::to_writer_pretty(out, &doc).map_err(|e| WpcnError::Io(e.to_string()))
}

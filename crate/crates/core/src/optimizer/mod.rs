//! Sum-rate maximization for power-level-modulated scheduling.
//!
//! For a fixed downlink duration the uplink split is whatever the users decode
//! from the downlink levels, every user spends all of its harvested energy, and
//! the only free variables left are the K downlink levels. [`solve`] nests a
//! search over the levels inside a one-dimensional search over the downlink
//! duration. [`oracle_grid_search`] is the exhaustive reference used to
//! validate it.

mod inner;
mod oracle;
pub mod projection;
pub mod search;
mod transform;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Result, WpcnError};
use crate::physics::{
    affordable_uplink_power, constraint_residuals, sum_rate, total_harvested, Schedule,
    SystemConfig, FEASIBILITY_TOL,
};

pub use oracle::{oracle_grid_search, ORACLE_MAX_USERS};
pub use transform::{
    from_transformed, to_transformed, transformed_constraint_residuals, TransformedPoint,
    TransformedReport, TransformedResidual,
};

/// Which of the two scheduling problems is being solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Levels range over `[0, P_P]`; uplink time is proportional to level.
    FullRange,
    /// Every level keeps `(1 - α)` times the mean level; only the excess
    /// carries the schedule.
    ReducedRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub channel: ChannelRealization,
    pub config: SystemConfig,
    pub variant: Variant,
}

impl ProblemInstance {
    /// Picks the variant from `config.alpha`: 1 is full range, (0, 1) reduced.
    pub fn new(channel: ChannelRealization, config: SystemConfig) -> Result<Self> {
        let variant = if config.alpha == 1.0 {
            Variant::FullRange
        } else if config.alpha > 0.0 && config.alpha < 1.0 {
            Variant::ReducedRange
        } else {
            return Err(WpcnError::domain(format!(
                "dynamic range index {} has no modulation; use the equal-split baseline",
                config.alpha
            )));
        };
        Self::checked(channel, config, variant)
    }

    pub fn full_range(channel: ChannelRealization, mut config: SystemConfig) -> Result<Self> {
        config.alpha = 1.0;
        Self::checked(channel, config, Variant::FullRange)
    }

    pub fn reduced_range(channel: ChannelRealization, config: SystemConfig) -> Result<Self> {
        if !(config.alpha > 0.0 && config.alpha < 1.0) {
            return Err(WpcnError::domain("reduced-range problem needs 0 < α < 1"));
        }
        Self::checked(channel, config, Variant::ReducedRange)
    }

    fn checked(channel: ChannelRealization, config: SystemConfig, variant: Variant) -> Result<Self> {
        // A peak below the average is reported by `solve` as infeasible rather
        // than rejected here.
        let mut probe = config.clone();
        probe.peak_power = probe.peak_power.max(probe.avg_power);
        probe.validate()?;
        if channel.users() != config.users() || channel.h_ul.len() != channel.h_dl.len() {
            return Err(WpcnError::domain(format!(
                "channel has {} users but config has {}",
                channel.users(),
                config.users()
            )));
        }
        if channel
            .h_dl
            .iter()
            .chain(&channel.h_ul)
            .any(|h| !(h.is_finite() && *h >= 0.0))
        {
            return Err(WpcnError::domain("channel gains must be finite and non-negative"));
        }
        Ok(ProblemInstance {
            channel,
            config,
            variant,
        })
    }

    pub fn users(&self) -> usize {
        self.channel.users()
    }

    fn is_feasible_config(&self) -> bool {
        self.config.peak_power >= self.config.avg_power
    }
}

/// Uplink fractions the users decode from levels `p`. Writes into `out` and
/// returns the total level.
pub(crate) fn decoded_fractions(p: &[f64], alpha: f64, out: &mut [f64]) -> f64 {
    let k = p.len() as f64;
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        out.iter_mut().for_each(|f| *f = 0.0);
        return total;
    }
    let common = (1.0 - alpha) * total / k;
    let mut norm = 0.0;
    for (o, &pi) in out.iter_mut().zip(p) {
        *o = (pi - common).max(0.0);
        norm += *o;
    }
    if norm > 0.0 {
        out.iter_mut().for_each(|f| *f /= norm);
    } else {
        out.iter_mut().for_each(|f| *f = 1.0 / k);
    }
    total
}

fn user_rate(duration: f64, energy: f64, h: f64, circuit: f64, noise: f64) -> f64 {
    if duration <= 0.0 {
        return 0.0;
    }
    let power = affordable_uplink_power(energy, duration, circuit);
    duration * (h * power / noise).ln_1p()
}

/// Sum rate once the split and total level are known.
pub(crate) fn objective_from_split(tau_d: f64, fractions: &[f64], total: f64, problem: &ProblemInstance) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let cfg = &problem.config;
    let uplink = 1.0 - tau_d;
    let energy_scale = cfg.eta * tau_d * total / fractions.len() as f64;
    let mut sum = 0.0;
    for (i, f) in fractions.iter().enumerate() {
        sum += user_rate(
            f * uplink,
            energy_scale * problem.channel.h_dl[i],
            problem.channel.h_ul[i],
            cfg.circuit_power[i],
            cfg.noise_power,
        );
    }
    sum
}

/// Objective with the energy and level constraints tight; no validation.
pub(crate) fn objective_unchecked(tau_d: f64, p: &[f64], problem: &ProblemInstance) -> f64 {
    let k = p.len();
    let mut f = [0.0f64; 16];
    let mut heap;
    let fractions: &mut [f64] = if k <= f.len() {
        &mut f[..k]
    } else {
        heap = vec![0.0; k];
        &mut heap
    };
    let total = decoded_fractions(p, problem.config.alpha, fractions);
    objective_from_split(tau_d, fractions, total, problem)
}

/// Sum rate for downlink duration `tau_d` and levels `p_dl`, with every user
/// decoding its uplink share from the levels and spending all harvested energy.
pub fn reduced_objective(tau_d: f64, p_dl: &[f64], problem: &ProblemInstance) -> Result<f64> {
    if !(tau_d > 0.0 && tau_d < 1.0) {
        return Err(WpcnError::domain(format!(
            "downlink duration must lie in (0, 1), got {tau_d}"
        )));
    }
    if p_dl.len() != problem.users() {
        return Err(WpcnError::domain(format!(
            "expected {} downlink levels, got {}",
            problem.users(),
            p_dl.len()
        )));
    }
    if p_dl.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(WpcnError::domain("downlink levels must be non-negative"));
    }
    Ok(objective_unchecked(tau_d, p_dl, problem))
}

/// Full schedule for a `(tau_d, levels)` pair under the tight-constraint rules.
pub fn schedule_from_levels(tau_d: f64, p_dl: &[f64], problem: &ProblemInstance) -> Result<Schedule> {
    let cfg = &problem.config;
    let k = problem.users();
    let mut fractions = vec![0.0; k];
    decoded_fractions(p_dl, cfg.alpha, &mut fractions);
    let tau_ul: Vec<f64> = fractions.iter().map(|f| f * (1.0 - tau_d)).collect();
    let mut p_ul = Vec::with_capacity(k);
    for i in 0..k {
        let energy = total_harvested(problem.channel.h_dl[i], p_dl, tau_d, cfg.eta)?;
        p_ul.push(affordable_uplink_power(energy, tau_ul[i], cfg.circuit_power[i]));
    }
    Ok(Schedule {
        tau_d,
        p_dl: p_dl.to_vec(),
        tau_ul,
        p_ul,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Random starts for the split at the best downlink duration.
    pub restarts: usize,
    /// Width of the final bracket on the downlink duration.
    pub tolerance: f64,
    /// Coarse scan points on the downlink duration before refinement.
    pub outer_grid: usize,
    pub max_inner_iterations: usize,
    /// Seed of the restart stream.
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            restarts: 10,
            tolerance: 1e-7,
            outer_grid: 64,
            max_inner_iterations: 500,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    OptimalAtTolerance,
    FeasibleSuboptimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    /// Sum rate, nats/s/Hz.
    pub objective: f64,
    pub schedule: Schedule,
    pub iterations: usize,
    pub restarts_used: usize,
    pub max_residual: f64,
    pub status: SolveStatus,
}

/// Packs a candidate point into a result, recomputing the objective from the
/// schedule and grading it against the constraint set.
pub(crate) fn finish(
    problem: &ProblemInstance,
    tau_d: f64,
    p_dl: &[f64],
    iterations: usize,
    restarts_used: usize,
    converged: bool,
) -> Result<SolveResult> {
    let schedule = schedule_from_levels(tau_d, p_dl, problem)?;
    let objective = sum_rate(&schedule, &problem.channel, &problem.config)?;
    let report = constraint_residuals(&schedule, &problem.channel, &problem.config)?;
    let max_residual = report.max_residual;
    let status = if report.feasible && converged {
        SolveStatus::OptimalAtTolerance
    } else if max_residual <= 1e3 * FEASIBILITY_TOL {
        SolveStatus::FeasibleSuboptimal
    } else {
        SolveStatus::Infeasible
    };
    Ok(SolveResult {
        objective,
        schedule,
        iterations,
        restarts_used,
        max_residual,
        status,
    })
}

pub(crate) fn infeasible_result(problem: &ProblemInstance) -> SolveResult {
    let k = problem.users();
    let cfg = &problem.config;
    SolveResult {
        objective: 0.0,
        schedule: Schedule {
            tau_d: 0.0,
            p_dl: vec![0.0; k],
            tau_ul: vec![0.0; k],
            p_ul: vec![0.0; k],
        },
        iterations: 0,
        restarts_used: 0,
        max_residual: (cfg.avg_power - cfg.peak_power) / cfg.peak_power,
        status: SolveStatus::Infeasible,
    }
}

/// Best sum rate at a fixed downlink duration: the function the outer search
/// maximizes.
pub fn rate_at_downlink(problem: &ProblemInstance, tau_d: f64) -> Result<f64> {
    if !(tau_d > 0.0 && tau_d < 1.0) {
        return Err(WpcnError::domain(format!(
            "downlink duration must lie in (0, 1), got {tau_d}"
        )));
    }
    if tau_d > problem.config.max_downlink_time() {
        return Err(WpcnError::domain("downlink duration exceeds the energy budget"));
    }
    if !problem.is_feasible_config() {
        return Ok(0.0);
    }
    let options = SolveOptions {
        restarts: 0,
        ..SolveOptions::default()
    };
    Ok(inner::InnerSolver::new(problem, &options).maximize(tau_d).value)
}

/// Maximizes the sum rate of `problem`.
pub fn solve(problem: &ProblemInstance, options: &SolveOptions) -> Result<SolveResult> {
    if !problem.is_feasible_config() {
        return Ok(infeasible_result(problem));
    }
    let mut inner = inner::InnerSolver::new(problem, options);
    let tau_max = problem.config.max_downlink_time();
    let best = search::maximize_scalar(
        |tau| {
            let r = inner.maximize(tau);
            (r.value, r)
        },
        0.0,
        tau_max,
        options.outer_grid,
        options.tolerance,
    );
    let point = inner.polish(best.x, best.payload);
    let levels = inner.levels(point.total, &point.split);
    finish(
        problem,
        best.x,
        &levels,
        inner.iterations(),
        options.restarts,
        point.converged,
    )
}

#[cfg(test)]
mod tests;

//! Frame, energy and rate model.
//!
//! Units are linear throughout: watts, joules, and a frame of unit length.
//! Bandwidth is normalized to 1 Hz, so a per-Hz power density reads as a power.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, Topology};
use crate::error::{Result, WpcnError};

/// Scaled tolerance used for every feasibility decision.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Scalar parameters of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Average downlink power `P_A`, watts.
    pub avg_power: f64,
    /// Peak downlink power `P_P`, watts.
    pub peak_power: f64,
    /// Dynamic range index.
    pub alpha: f64,
    /// Harvesting efficiency.
    pub eta: f64,
    /// Noise power `N0`, watts.
    pub noise_power: f64,
    /// Circuit power of each user, watts.
    pub circuit_power: Vec<f64>,
    /// Optional downlink energy budget `E^D`, joules.
    pub energy_budget: Option<f64>,
    pub topology: Topology,
}

impl SystemConfig {
    pub fn users(&self) -> usize {
        self.topology.users()
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        let k = self.users();
        if !(self.avg_power.is_finite() && self.avg_power > 0.0) {
            return Err(WpcnError::config("pa", "must be a positive power"));
        }
        if !(self.peak_power.is_finite() && self.peak_power >= self.avg_power) {
            return Err(WpcnError::config("pp", "must be at least the average power pa"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(WpcnError::config("alpha", "must lie in [0, 1]"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(WpcnError::config("eta", "must lie in (0, 1]"));
        }
        if !(self.noise_power.is_finite() && self.noise_power > 0.0) {
            return Err(WpcnError::config("n0", "must be a positive power"));
        }
        if self.circuit_power.len() != k {
            return Err(WpcnError::config(
                "pc",
                format!("must list one circuit power per user ({k})"),
            ));
        }
        if let Some(i) = self
            .circuit_power
            .iter()
            .position(|p| !(p.is_finite() && *p >= 0.0))
        {
            return Err(WpcnError::config(format!("pc[{i}]"), "must be non-negative"));
        }
        if let Some(ed) = self.energy_budget {
            if !(ed.is_finite() && ed > 0.0) {
                return Err(WpcnError::config("e_d", "must be positive when present"));
            }
        }
        Ok(())
    }

    /// Largest admissible downlink duration: 1, or `E^D / P_A` when a budget is set.
    pub fn max_downlink_time(&self) -> f64 {
        match self.energy_budget {
            Some(ed) => (ed / self.avg_power).min(1.0),
            None => 1.0,
        }
    }

    /// Total downlink power over the K subslots, `K · P_A`.
    pub fn power_budget(&self) -> f64 {
        self.users() as f64 * self.avg_power
    }
}

/// A complete operating point of the frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub tau_d: f64,
    pub p_dl: Vec<f64>,
    pub tau_ul: Vec<f64>,
    pub p_ul: Vec<f64>,
}

impl Schedule {
    pub fn users(&self) -> usize {
        self.p_dl.len()
    }

    fn check_lengths(&self, k: usize) -> Result<()> {
        if self.p_dl.len() != k || self.tau_ul.len() != k || self.p_ul.len() != k {
            return Err(WpcnError::domain(format!(
                "schedule vectors must all have length {k} (got {}, {}, {})",
                self.p_dl.len(),
                self.tau_ul.len(),
                self.p_ul.len()
            )));
        }
        Ok(())
    }
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watt_to_dbm(watt: f64) -> f64 {
    10.0 * watt.log10() + 30.0
}

/// Energy user `i` harvests in one downlink subslot, `η h p τ_d / K`.
pub fn harvested_energy_subslot(h_dl: f64, p_dl: f64, tau_d: f64, users: usize, eta: f64) -> Result<f64> {
    if users == 0 {
        return Err(WpcnError::domain("subslot count K must be at least 1"));
    }
    Ok(eta * h_dl * p_dl * tau_d / users as f64)
}

/// Energy harvested over the whole downlink phase.
pub fn total_harvested(h_dl: f64, p_dl: &[f64], tau_d: f64, eta: f64) -> Result<f64> {
    if p_dl.is_empty() {
        return Err(WpcnError::domain("subslot count K must be at least 1"));
    }
    let total: f64 = p_dl.iter().sum();
    harvested_energy_subslot(h_dl, total, tau_d, p_dl.len(), eta)
}

/// Achievable uplink rate in nats/s/Hz; zero-duration slots carry no rate.
pub fn rate(tau_u: f64, h_ul: f64, p_ul: f64, noise_power: f64) -> Result<f64> {
    if !(noise_power > 0.0) {
        return Err(WpcnError::domain(format!(
            "noise power must be positive, got {noise_power}"
        )));
    }
    if tau_u < 0.0 || h_ul < 0.0 || p_ul < 0.0 {
        return Err(WpcnError::domain("rate inputs must be non-negative"));
    }
    if tau_u == 0.0 {
        return Ok(0.0);
    }
    Ok(tau_u * (h_ul * p_ul / noise_power).ln_1p())
}

/// Uplink power a user can afford when spending energy `energy` over `tau_u`.
/// Users whose energy does not cover their circuit power stay silent.
pub fn affordable_uplink_power(energy: f64, tau_u: f64, circuit_power: f64) -> f64 {
    if tau_u <= 0.0 {
        return 0.0;
    }
    (energy / tau_u - circuit_power).max(0.0)
}

pub fn sum_rate(schedule: &Schedule, channel: &ChannelRealization, config: &SystemConfig) -> Result<f64> {
    let k = channel.users();
    schedule.check_lengths(k)?;
    let mut total = 0.0;
    for i in 0..k {
        total += rate(schedule.tau_ul[i], channel.h_ul[i], schedule.p_ul[i], config.noise_power)?;
    }
    Ok(total)
}

/// Which constraint a residual belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    /// Sign constraints on durations and powers.
    NonNegative,
    /// `τ^D + Σ τ_i^U ≤ 1`.
    TimeBudget,
    /// `Σ P_i^D ≤ K P_A`.
    PowerBudget,
    /// `P_i^D ≤ P_P`.
    PeakPower,
    /// Energy spent in the uplink cannot exceed the energy harvested.
    EnergyCausality,
    /// Uplink time carried by the downlink power levels.
    ScheduleLevel,
    /// `τ^D ≤ E^D / P_A`.
    EnergyBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub constraint: Constraint,
    pub user: Option<usize>,
    /// `lhs - rhs`; positive means violated.
    pub value: f64,
    /// Natural magnitude of the constraint used to normalize `value`.
    pub scale: f64,
}

impl Residual {
    pub fn scaled(&self) -> f64 {
        if self.scale > 0.0 {
            self.value / self.scale
        } else if self.value > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub entries: Vec<Residual>,
    /// Largest scaled residual.
    pub max_residual: f64,
    pub feasible: bool,
}

impl ResidualReport {
    pub(crate) fn from_entries(entries: Vec<Residual>) -> Self {
        let max_residual = entries
            .iter()
            .map(Residual::scaled)
            .fold(f64::NEG_INFINITY, f64::max);
        ResidualReport {
            feasible: max_residual <= FEASIBILITY_TOL,
            entries,
            max_residual,
        }
    }

    pub fn get(&self, constraint: Constraint, user: Option<usize>) -> Option<&Residual> {
        self.entries
            .iter()
            .find(|r| r.constraint == constraint && r.user == user)
    }
}

/// Upper bound on user `i`'s uplink time implied by the downlink levels.
///
/// Users only see relative levels, so the constant part of each level is
/// `(1 - α)` times the mean level and only the excess carries the schedule.
/// At `α = 1` this is the proportional rule. Returns `None` for `α = 0`, where
/// the split is simply equal.
pub fn level_time_bound(p_dl: &[f64], user: usize, tau_d: f64, alpha: f64) -> Option<f64> {
    if alpha == 0.0 {
        return None;
    }
    let total: f64 = p_dl.iter().sum();
    if total <= 0.0 {
        return Some(0.0);
    }
    let floor = (1.0 - alpha) * total / p_dl.len() as f64;
    let share = (p_dl[user] - floor) / (alpha * total);
    Some(share * (1.0 - tau_d))
}

/// Signed residual of every constraint of the scheduling problem.
///
/// The level constraint follows [`level_time_bound`]; at `α = 0` it measures
/// the distance to the equal split.
pub fn constraint_residuals(
    schedule: &Schedule,
    channel: &ChannelRealization,
    config: &SystemConfig,
) -> Result<ResidualReport> {
    let k = channel.users();
    if config.users() != k {
        return Err(WpcnError::domain(format!(
            "config has {} users but channel has {k}",
            config.users()
        )));
    }
    schedule.check_lengths(k)?;
    let pa = config.avg_power;
    let mut entries = Vec::with_capacity(6 * k + 3);
    let mut push = |constraint, user, value, scale| {
        entries.push(Residual {
            constraint,
            user,
            value,
            scale,
        })
    };

    push(Constraint::NonNegative, None, -schedule.tau_d, 1.0);
    for i in 0..k {
        push(Constraint::NonNegative, Some(i), -schedule.tau_ul[i], 1.0);
        push(Constraint::NonNegative, Some(i), -schedule.p_dl[i], pa);
        push(Constraint::NonNegative, Some(i), -schedule.p_ul[i], pa);
    }

    let time: f64 = schedule.tau_d + schedule.tau_ul.iter().sum::<f64>();
    push(Constraint::TimeBudget, None, time - 1.0, 1.0);

    let budget = config.power_budget();
    let power: f64 = schedule.p_dl.iter().sum();
    push(Constraint::PowerBudget, None, power - budget, budget);

    for i in 0..k {
        push(
            Constraint::PeakPower,
            Some(i),
            schedule.p_dl[i] - config.peak_power,
            config.peak_power,
        );
    }

    for i in 0..k {
        let harvested = total_harvested(channel.h_dl[i], &schedule.p_dl, schedule.tau_d, config.eta)?;
        // Circuit power is only drawn while the user actually transmits.
        let spent = if schedule.p_ul[i] > 0.0 {
            (schedule.p_ul[i] + config.circuit_power[i]) * schedule.tau_ul[i]
        } else {
            0.0
        };
        push(
            Constraint::EnergyCausality,
            Some(i),
            spent - harvested,
            spent.abs().max(harvested.abs()),
        );
    }

    for i in 0..k {
        let value = match level_time_bound(&schedule.p_dl, i, schedule.tau_d, config.alpha) {
            Some(bound) => schedule.tau_ul[i] - bound,
            None => (schedule.tau_ul[i] - (1.0 - schedule.tau_d) / k as f64).abs(),
        };
        push(Constraint::ScheduleLevel, Some(i), value, 1.0);
    }

    if let Some(ed) = config.energy_budget {
        push(Constraint::EnergyBudget, None, schedule.tau_d - ed / pa, 1.0);
    }

    Ok(ResidualReport::from_entries(entries))
}

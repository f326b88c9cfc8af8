//! Logarithmic change of variables.
//!
//! With every duration and power written as `exp(·)` the time, power and
//! energy constraints become log-sum-exp inequalities. The level constraint is
//! divided through by its own level first, which for `α = 1` turns it into
//! `Σ_j exp(t_i + p_j - p_i) + exp(t_d) ≤ 1`. For `α < 1` the constant part of
//! the levels leaves a term on the right, so the residual is a difference of
//! two log-sum-exp expressions.

use serde::{Deserialize, Serialize};

use super::{ProblemInstance, Variant};
use crate::error::{Result, WpcnError};
use crate::physics::{Constraint, Schedule, FEASIBILITY_TOL};

/// Elementwise logarithm of a [`Schedule`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedPoint {
    pub t_d: f64,
    pub t_ul: Vec<f64>,
    pub p_dl_log: Vec<f64>,
    pub p_ul_log: Vec<f64>,
}

fn checked_ln(x: f64, what: &str) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x.ln())
    } else {
        Err(WpcnError::domain(format!("{what} must be positive to take its logarithm, got {x}")))
    }
}

pub fn to_transformed(schedule: &Schedule) -> Result<TransformedPoint> {
    let logs = |v: &[f64], what: &str| -> Result<Vec<f64>> { v.iter().map(|x| checked_ln(*x, what)).collect() };
    Ok(TransformedPoint {
        t_d: checked_ln(schedule.tau_d, "tau_d")?,
        t_ul: logs(&schedule.tau_ul, "tau_ul")?,
        p_dl_log: logs(&schedule.p_dl, "p_dl")?,
        p_ul_log: logs(&schedule.p_ul, "p_ul")?,
    })
}

pub fn from_transformed(point: &TransformedPoint) -> Schedule {
    let exps = |v: &[f64]| v.iter().map(|x| x.exp()).collect();
    Schedule {
        tau_d: point.t_d.exp(),
        tau_ul: exps(&point.t_ul),
        p_dl: exps(&point.p_dl_log),
        p_ul: exps(&point.p_ul_log),
    }
}

fn log_sum_exp<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let terms: Vec<f64> = terms.into_iter().collect();
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    if top == f64::INFINITY {
        return top;
    }
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedResidual {
    pub constraint: Constraint,
    pub user: Option<usize>,
    /// `log(lhs) - log(rhs)`; positive means violated.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedReport {
    pub entries: Vec<TransformedResidual>,
    pub max_residual: f64,
    pub feasible: bool,
}

impl TransformedReport {
    pub fn get(&self, constraint: Constraint, user: Option<usize>) -> Option<&TransformedResidual> {
        self.entries
            .iter()
            .find(|r| r.constraint == constraint && r.user == user)
    }
}

/// Residuals of the log-domain constraint set. Non-negativity is implicit.
pub fn transformed_constraint_residuals(point: &TransformedPoint, problem: &ProblemInstance) -> Result<TransformedReport> {
    let k = problem.users();
    if point.t_ul.len() != k || point.p_dl_log.len() != k || point.p_ul_log.len() != k {
        return Err(WpcnError::domain(format!("transformed point must have {k} users")));
    }
    let cfg = &problem.config;
    let kf = k as f64;
    let mut entries = Vec::with_capacity(3 * k + 3);
    let mut push = |constraint, user, value| {
        entries.push(TransformedResidual {
            constraint,
            user,
            value,
        })
    };

    push(
        Constraint::TimeBudget,
        None,
        log_sum_exp(std::iter::once(point.t_d).chain(point.t_ul.iter().cloned())),
    );
    push(
        Constraint::PowerBudget,
        None,
        log_sum_exp(point.p_dl_log.iter().cloned()) - (kf * cfg.avg_power).ln(),
    );
    for i in 0..k {
        push(Constraint::PeakPower, Some(i), point.p_dl_log[i] - cfg.peak_power.ln());
    }

    for i in 0..k {
        let t = point.t_ul[i];
        let spent = log_sum_exp([point.p_ul_log[i] + t, cfg.circuit_power[i].ln() + t]);
        let gain = (cfg.eta * problem.channel.h_dl[i] / kf).ln();
        let harvested = log_sum_exp(point.p_dl_log.iter().map(|p| p + point.t_d + gain));
        let value = if harvested == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            spent - harvested
        };
        push(Constraint::EnergyCausality, Some(i), value);
    }

    for i in 0..k {
        let t = point.t_ul[i];
        let own = point.p_dl_log[i];
        let ratios = || point.p_dl_log.iter().map(move |p| p - own);
        let value = match problem.variant {
            Variant::FullRange => log_sum_exp(ratios().map(|r| t + r).chain(std::iter::once(point.t_d))),
            Variant::ReducedRange => {
                // α τ_i Σ_j P_j/P_i + c Σ_j P_j/P_i + τ_d ≤ 1 + c τ_d Σ_j P_j/P_i,
                // c = (1 - α)/K.
                let c = ((1.0 - cfg.alpha) / kf).ln();
                let lhs = log_sum_exp(
                    ratios()
                        .map(|r| cfg.alpha.ln() + t + r)
                        .chain(ratios().map(|r| c + r))
                        .chain(std::iter::once(point.t_d)),
                );
                lhs - (c + point.t_d + log_sum_exp(ratios())).exp().ln_1p()
            }
        };
        push(Constraint::ScheduleLevel, Some(i), value);
    }

    if let Some(ed) = cfg.energy_budget {
        push(Constraint::EnergyBudget, None, point.t_d - (ed / cfg.avg_power).ln());
    }

    let max_residual = entries.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
    Ok(TransformedReport {
        feasible: max_residual <= FEASIBILITY_TOL,
        entries,
        max_residual,
    })
}

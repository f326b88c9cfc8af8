//! Exhaustive reference solver for small K.
//!
//! The uplink split is enumerated on the simplex grid `n / resolution`, the
//! downlink duration on `j / resolution`. For each split the levels are
//! scaled up until either the budget or the peak binds; with the split fixed,
//! harvested energy only grows with the total level.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::{decoded_fractions, finish, infeasible_result, objective_from_split, ProblemInstance, SolveResult};
use crate::error::{Result, WpcnError};

pub const ORACLE_MAX_USERS: usize = 3;

fn compositions(users: usize, resolution: usize) -> Vec<Vec<usize>> {
    fn rec(remaining: usize, slots: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for n in 0..=remaining {
            prefix.push(n);
            rec(remaining - n, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(resolution, users, &mut Vec::with_capacity(users), &mut out);
    out
}

fn levels_for_split(split: &[f64], problem: &ProblemInstance) -> Vec<f64> {
    let cfg = &problem.config;
    let floor = (1.0 - cfg.alpha) / split.len() as f64;
    let largest = split.iter().cloned().fold(0.0f64, f64::max);
    let total = cfg.power_budget().min(cfg.peak_power / (floor + cfg.alpha * largest));
    split
        .iter()
        .map(|f| (total * (floor + cfg.alpha * f)).min(cfg.peak_power))
        .collect()
}

#[derive(Debug, Clone)]
struct Candidate {
    value: f64,
    tau_d: f64,
    levels: Vec<f64>,
}

fn better(a: &Candidate, b: &Candidate) -> bool {
    a.value > b.value
        || (a.value == b.value && (a.tau_d < b.tau_d || (a.tau_d == b.tau_d && a.levels < b.levels)))
}

/// Levels of one grid split with what the users decode from them.
struct GridPoint {
    levels: Vec<f64>,
    fractions: Vec<f64>,
    total: f64,
}

fn best_at(tau_d: f64, grid: &[GridPoint], problem: &ProblemInstance) -> Option<Candidate> {
    let mut best: Option<(f64, &GridPoint)> = None;
    for point in grid {
        let value = objective_from_split(tau_d, &point.fractions, point.total, problem);
        let replace = match best {
            None => true,
            Some((v, b)) => value > v || (value == v && point.levels < b.levels),
        };
        if replace {
            best = Some((value, point));
        }
    }
    best.map(|(value, point)| Candidate {
        value,
        tau_d,
        levels: point.levels.clone(),
    })
}

/// Grid-search maximum of the scheduling problem. Refuses `K > 3`.
///
/// Doubling the resolution nests the grids, so the objective never decreases.
pub fn oracle_grid_search(problem: &ProblemInstance, resolution: usize) -> Result<SolveResult> {
    let k = problem.users();
    if k > ORACLE_MAX_USERS {
        return Err(WpcnError::OracleTooLarge { users: k });
    }
    if resolution < 2 {
        return Err(WpcnError::domain("oracle resolution must be at least 2"));
    }
    if !problem.is_feasible_config() {
        return Ok(infeasible_result(problem));
    }
    let step = 1.0 / resolution as f64;
    let grid: Vec<GridPoint> = compositions(k, resolution)
        .into_iter()
        .map(|n| {
            let split: Vec<f64> = n.iter().map(|&c| c as f64 * step).collect();
            let levels = levels_for_split(&split, problem);
            let mut fractions = vec![0.0; k];
            let total = decoded_fractions(&levels, problem.config.alpha, &mut fractions);
            GridPoint {
                levels,
                fractions,
                total,
            }
        })
        .collect();
    let tau_max = problem.config.max_downlink_time();
    let taus: Vec<f64> = (1..resolution)
        .map(|j| j as f64 * step)
        .filter(|t| *t <= tau_max)
        .collect();
    if taus.is_empty() {
        return Err(WpcnError::domain("no grid downlink duration fits the energy budget"));
    }

    #[cfg(feature = "parallel")]
    let per_tau: Vec<Option<Candidate>> = taus.par_iter().map(|&t| best_at(t, &grid, problem)).collect();
    #[cfg(not(feature = "parallel"))]
    let per_tau: Vec<Option<Candidate>> = taus.iter().map(|&t| best_at(t, &grid, problem)).collect();

    let mut best: Option<Candidate> = None;
    for c in per_tau.into_iter().flatten() {
        if best.as_ref().map_or(true, |b| better(&c, b)) {
            best = Some(c);
        }
    }
    let best = best.expect("grid is non-empty");
    finish(
        problem,
        best.tau_d,
        &best.levels,
        taus.len() * grid.len(),
        0,
        true,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_counts() {
        assert_eq!(compositions(1, 7), vec![vec![7]]);
        assert_eq!(compositions(2, 4).len(), 5);
        assert_eq!(compositions(3, 4).len(), 15);
        assert!(compositions(3, 5).iter().all(|c| c.iter().sum::<usize>() == 5));
    }
}

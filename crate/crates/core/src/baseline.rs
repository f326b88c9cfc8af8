//! Equal resource allocation: constant downlink power `P_A`, equal uplink
//! slots, and only the downlink duration optimized.

use crate::channel::ChannelRealization;
use crate::error::{Result, WpcnError};
use crate::optimizer::search::maximize_scalar;
use crate::optimizer::{SolveResult, SolveStatus};
use crate::physics::{
    affordable_uplink_power, constraint_residuals, sum_rate, Schedule, SystemConfig,
};

const SCAN_POINTS: usize = 64;
const TAU_TOLERANCE: f64 = 1e-7;

fn check(channel: &ChannelRealization, config: &SystemConfig) -> Result<()> {
    config.validate()?;
    if channel.users() != config.users() {
        return Err(WpcnError::domain(format!(
            "channel has {} users but config has {}",
            channel.users(),
            config.users()
        )));
    }
    Ok(())
}

fn era_schedule(tau_d: f64, channel: &ChannelRealization, config: &SystemConfig) -> Schedule {
    let k = config.users();
    let slot = (1.0 - tau_d) / k as f64;
    let p_ul = (0..k)
        .map(|i| {
            let energy = config.eta * channel.h_dl[i] * config.avg_power * tau_d;
            affordable_uplink_power(energy, slot, config.circuit_power[i])
        })
        .collect();
    Schedule {
        tau_d,
        p_dl: vec![config.avg_power; k],
        tau_ul: vec![slot; k],
        p_ul,
    }
}

fn era_value(tau_d: f64, channel: &ChannelRealization, config: &SystemConfig) -> f64 {
    let k = config.users();
    let slot = (1.0 - tau_d) / k as f64;
    (0..k)
        .map(|i| {
            let energy = config.eta * channel.h_dl[i] * config.avg_power * tau_d;
            let power = affordable_uplink_power(energy, slot, config.circuit_power[i]);
            slot * (channel.h_ul[i] * power / config.noise_power).ln_1p()
        })
        .sum()
}

/// Equal-split sum rate at downlink duration `tau_d`.
pub fn era_objective(tau_d: f64, channel: &ChannelRealization, config: &SystemConfig) -> Result<f64> {
    if !(tau_d > 0.0 && tau_d < 1.0) {
        return Err(WpcnError::domain(format!(
            "downlink duration must lie in (0, 1), got {tau_d}"
        )));
    }
    check(channel, config)?;
    Ok(era_value(tau_d, channel, config))
}

/// Best equal-split operating point.
pub fn era_optimize(channel: &ChannelRealization, config: &SystemConfig) -> Result<SolveResult> {
    check(channel, config)?;
    let best = maximize_scalar(
        |tau| (era_value(tau, channel, config), ()),
        0.0,
        config.max_downlink_time(),
        SCAN_POINTS,
        TAU_TOLERANCE,
    );
    let schedule = era_schedule(best.x, channel, config);
    let objective = sum_rate(&schedule, channel, config)?;
    // The equal split satisfies the level constraint for every α, so grade it
    // against the full-range form.
    let mut graded = config.clone();
    graded.alpha = 1.0;
    let report = constraint_residuals(&schedule, channel, &graded)?;
    Ok(SolveResult {
        objective,
        schedule,
        iterations: best.evaluations,
        restarts_used: 0,
        max_residual: report.max_residual,
        status: if report.feasible {
            SolveStatus::OptimalAtTolerance
        } else {
            SolveStatus::Infeasible
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channel, Topology};
    use approx::assert_relative_eq;

    fn config(distances: Vec<f64>) -> SystemConfig {
        let k = distances.len();
        SystemConfig {
            avg_power: 0.1,
            peak_power: 0.4,
            alpha: 0.3,
            eta: 0.5,
            noise_power: 1e-19,
            circuit_power: vec![0.0; k],
            energy_budget: None,
            topology: Topology::new(distances, 2.0).unwrap(),
        }
    }

    #[test]
    fn vanishes_at_the_ends() {
        let cfg = config(vec![5.0, 10.0]);
        let ch = ChannelRealization::from_gains(vec![0.04, 0.01]).unwrap();
        assert!(era_objective(1e-200, &ch, &cfg).unwrap() < 1e-9);
        assert!(era_objective(1.0 - 1e-12, &ch, &cfg).unwrap() < 1e-9);
        assert!(era_objective(0.0, &ch, &cfg).is_err());
        assert!(era_objective(1.0, &ch, &cfg).is_err());
    }

    #[test]
    fn symmetric_users_share_equally() {
        let cfg = config(vec![10.0, 10.0]);
        let ch = ChannelRealization::from_gains(vec![0.01, 0.01]).unwrap();
        let r = era_optimize(&ch, &cfg).unwrap();
        let s = &r.schedule;
        let r0 = crate::physics::rate(s.tau_ul[0], 0.01, s.p_ul[0], 1e-19).unwrap();
        let r1 = crate::physics::rate(s.tau_ul[1], 0.01, s.p_ul[1], 1e-19).unwrap();
        assert_eq!(r0, r1);
        assert_relative_eq!(r.objective, r0 + r1, max_relative = 1e-14);
    }

    #[test]
    fn optimum_matches_dense_scan() {
        let cfg = config(vec![5.0, 10.0, 15.0]);
        let topo = cfg.topology.clone();
        for trial in 0..100 {
            let ch = sample_channel(&topo, 11, trial).unwrap();
            let r = era_optimize(&ch, &cfg).unwrap();
            let n = 100_000;
            let scan = (1..n)
                .map(|j| era_objective(j as f64 / n as f64, &ch, &cfg).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(r.objective >= scan - 1e-6, "trial {trial}: {} < {scan}", r.objective);
            assert!(r.objective <= scan + 1e-6);
        }
    }

    #[test]
    fn equal_split_is_feasible_for_every_alpha() {
        let cfg = config(vec![5.0, 10.0, 15.0, 10.0]);
        let ch = sample_channel(&cfg.topology, 3, 9).unwrap();
        let r = era_optimize(&ch, &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::OptimalAtTolerance);
        for alpha in [0.05, 0.3, 0.5, 0.99, 1.0] {
            let mut graded = cfg.clone();
            graded.alpha = alpha;
            assert!(constraint_residuals(&r.schedule, &ch, &graded).unwrap().feasible);
        }
    }

    #[test]
    fn midpoint_concave_in_downlink_time() {
        use rand::{Rng, SeedableRng};
        let cfg = config(vec![5.0, 10.0, 15.0]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for trial in 0..200 {
            let ch = sample_channel(&cfg.topology, 1, trial).unwrap();
            let a: f64 = rng.gen_range(1e-6..1.0 - 1e-6);
            let b: f64 = rng.gen_range(1e-6..1.0 - 1e-6);
            let mid = era_objective(0.5 * (a + b), &ch, &cfg).unwrap();
            let avg = 0.5 * (era_objective(a, &ch, &cfg).unwrap() + era_objective(b, &ch, &cfg).unwrap());
            assert!(mid >= avg - 1e-9, "{mid} < {avg}");
        }
    }
}

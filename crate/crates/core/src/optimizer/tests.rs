use super::*;
use crate::baseline::era_optimize;
use crate::channel::{sample_channel, Topology};
use crate::physics::{constraint_residuals, dbm_to_watt, Constraint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(distances: Vec<f64>, alpha: f64, ppr: f64) -> SystemConfig {
    let k = distances.len();
    let pa = dbm_to_watt(20.0);
    SystemConfig {
        avg_power: pa,
        peak_power: ppr * pa,
        alpha,
        eta: 0.5,
        noise_power: dbm_to_watt(-160.0),
        circuit_power: vec![0.0; k],
        energy_budget: None,
        topology: Topology::new(distances, 2.0).unwrap(),
    }
}

fn instance(distances: Vec<f64>, alpha: f64, ppr: f64, trial: u64) -> ProblemInstance {
    let cfg = config(distances, alpha, ppr);
    let ch = sample_channel(&cfg.topology, 11, trial).unwrap();
    ProblemInstance::new(ch, cfg).unwrap()
}

fn quick() -> SolveOptions {
    SolveOptions {
        restarts: 2,
        ..SolveOptions::default()
    }
}

/// Ternary search on a concave function, independent of the solver's search.
fn ternary_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..300 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    f(0.5 * (lo + hi))
}

#[test]
fn single_user_matches_scalar_oracle() {
    for (trial, alpha) in [(0, 1.0), (1, 0.5), (2, 0.2)] {
        let p = instance(vec![7.0], alpha, 3.0, trial);
        let cfg = &p.config;
        // One user takes the whole uplink and the whole budget.
        let a = cfg.eta * p.channel.h_dl[0] * p.channel.h_ul[0] * cfg.avg_power / cfg.noise_power;
        let expected = ternary_max(|t| (1.0 - t) * (a * t / (1.0 - t)).ln_1p(), 0.0, 1.0);
        let r = solve(&p, &quick()).unwrap();
        assert!(
            (r.objective - expected).abs() <= 1e-6 * expected,
            "{} vs {expected}",
            r.objective
        );
        assert_eq!(r.status, SolveStatus::OptimalAtTolerance);
    }
}

#[test]
fn two_users_match_grid_oracle() {
    for trial in 0..4 {
        for (alpha, ppr) in [(1.0, 1.2), (0.5, 1.5), (0.3, 4.0)] {
            let p = instance(vec![5.0, 15.0], alpha, ppr, trial);
            let oracle = oracle_grid_search(&p, 200).unwrap();
            let r = solve(&p, &quick()).unwrap();
            let gap = (r.objective - oracle.objective) / oracle.objective;
            assert!(gap.abs() <= 5e-3, "trial {trial} α {alpha}: {gap}");
            // The grid is coarse; the continuous solver should not lose to it.
            assert!(gap >= -1e-9, "trial {trial} α {alpha}: {gap}");
        }
    }
}

#[test]
fn circuit_power_matches_grid_oracle() {
    for trial in 0..3 {
        let mut p = instance(vec![5.0, 10.0], 0.5, 2.0, trial);
        // Comparable to the harvested power, so the rate is no longer concave.
        p.config.circuit_power = vec![2e-4, 2e-4];
        let oracle = oracle_grid_search(&p, 200).unwrap();
        let r = solve(&p, &SolveOptions::default()).unwrap();
        let gap = (r.objective - oracle.objective) / oracle.objective;
        assert!(gap >= -5e-3, "trial {trial}: {gap}");
        assert!(r.max_residual <= FEASIBILITY_TOL, "{}", r.max_residual);
    }
}

#[test]
fn oracle_refuses_large_instances() {
    let p = instance(vec![10.0; 4], 1.0, 2.0, 0);
    assert_eq!(
        oracle_grid_search(&p, 10).unwrap_err(),
        WpcnError::OracleTooLarge { users: 4 }
    );
}

#[test]
fn oracle_improves_with_resolution() {
    let p = instance(vec![5.0, 10.0, 15.0], 0.5, 2.0, 3);
    let mut last = 0.0;
    for res in [25, 50, 100] {
        let v = oracle_grid_search(&p, res).unwrap().objective;
        assert!(v >= last, "{res}: {v} < {last}");
        last = v;
    }
}

#[test]
fn symmetric_users_get_equal_shares() {
    let cfg = config(vec![10.0; 3], 0.5, 2.0);
    let ch = ChannelRealization::from_gains(vec![0.01; 3]).unwrap();
    let p = ProblemInstance::new(ch, cfg).unwrap();
    let r = solve(&p, &quick()).unwrap();
    for i in 1..3 {
        assert!((r.schedule.p_dl[i] - r.schedule.p_dl[0]).abs() <= 1e-12 * r.schedule.p_dl[0]);
        assert!((r.schedule.tau_ul[i] - r.schedule.tau_ul[0]).abs() <= 1e-12);
    }
}

#[test]
fn silent_user_is_handled() {
    let cfg = config(vec![5.0, 10.0], 1.0, 2.0);
    let ch = ChannelRealization::from_gains(vec![0.04, 0.0]).unwrap();
    let p = ProblemInstance::new(ch.clone(), cfg.clone()).unwrap();
    let r = solve(&p, &quick()).unwrap();
    assert!(r.objective.is_finite() && r.objective > 0.0);
    assert!(r.max_residual <= FEASIBILITY_TOL);
    assert_eq!(r.schedule.p_ul[1], 0.0);
    assert!(r.objective >= era_optimize(&ch, &cfg).unwrap().objective);
}

#[test]
fn vanishing_gains_give_vanishing_rate() {
    let cfg = config(vec![10.0; 2], 0.5, 2.0);
    let ch = ChannelRealization::from_gains(vec![1e-30, 1e-30]).unwrap();
    let r = solve(&ProblemInstance::new(ch, cfg).unwrap(), &quick()).unwrap();
    assert!(r.objective >= 0.0 && r.objective < 1e-9, "{}", r.objective);
}

#[test]
fn peak_below_average_is_infeasible() {
    let mut cfg = config(vec![10.0; 2], 1.0, 1.0);
    cfg.peak_power = 0.5 * cfg.avg_power;
    let ch = ChannelRealization::from_gains(vec![0.01; 2]).unwrap();
    let r = solve(&ProblemInstance::new(ch, cfg).unwrap(), &quick()).unwrap();
    assert_eq!(r.status, SolveStatus::Infeasible);
    assert!(r.max_residual > 0.0);
}

#[test]
fn zero_alpha_is_rejected() {
    let cfg = config(vec![10.0; 2], 0.0, 2.0);
    let ch = ChannelRealization::from_gains(vec![0.01; 2]).unwrap();
    assert!(ProblemInstance::new(ch, cfg).is_err());
}

#[test]
fn energy_budget_caps_downlink() {
    let mut cfg = config(vec![5.0, 10.0], 1.0, 2.0);
    cfg.energy_budget = Some(0.05 * cfg.avg_power);
    let ch = sample_channel(&cfg.topology, 1, 0).unwrap();
    let r = solve(&ProblemInstance::new(ch, cfg).unwrap(), &quick()).unwrap();
    assert!(r.schedule.tau_d <= 0.05 + 1e-12);
    assert_eq!(r.status, SolveStatus::OptimalAtTolerance);
}

#[test]
fn solutions_are_feasible_and_beat_equal_split() {
    for trial in 0..20 {
        for alpha in [0.3, 0.5, 1.0] {
            let p = instance(vec![5.0, 10.0, 15.0, 10.0, 10.0], alpha, 1.5, trial);
            let r = solve(&p, &quick()).unwrap();
            let report = constraint_residuals(&r.schedule, &p.channel, &p.config).unwrap();
            assert!(report.feasible, "{report:?}");
            let era = era_optimize(&p.channel, &p.config).unwrap();
            assert!(r.objective >= era.objective - 1e-9, "{} < {}", r.objective, era.objective);
        }
    }
}

#[test]
fn smaller_alpha_never_loses() {
    // The admissible level sets nest as α shrinks.
    for trial in 0..20 {
        for ppr in [1.5, 2.5, 4.0] {
            let values: Vec<f64> = [0.3, 0.5, 1.0]
                .iter()
                .map(|&a| {
                    let p = instance(vec![5.0, 10.0, 15.0, 10.0, 10.0], a, ppr, trial);
                    solve(&p, &quick()).unwrap().objective
                })
                .collect();
            assert!(values[0] >= values[1] * (1.0 - 1e-9), "{trial} {ppr}: {values:?}");
            assert!(values[1] >= values[2] * (1.0 - 1e-9), "{trial} {ppr}: {values:?}");
        }
    }
}

#[test]
fn solve_is_deterministic() {
    let p = instance(vec![5.0, 10.0, 15.0], 0.5, 1.5, 9);
    let mut p2 = p.clone();
    p2.config.circuit_power = vec![1e-4; 3];
    for p in [p, p2] {
        assert_eq!(solve(&p, &SolveOptions::default()).unwrap(), solve(&p, &SolveOptions::default()).unwrap());
    }
}

#[test]
fn reduced_objective_is_midpoint_concave_in_tau() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..200 {
        let alpha = [0.3, 0.5, 1.0][trial % 3];
        let p = instance(vec![5.0, 10.0, 15.0], alpha, 2.0, trial as u64);
        let raw: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
        let sum: f64 = raw.iter().sum();
        let f = crate::plm::ScheduleFractions::new(raw.iter().map(|r| r / sum).collect::<Vec<_>>());
        let Ok(f) = f else { continue };
        let total = 0.5 * p.config.power_budget();
        let levels = crate::plm::encode_levels(&f, total, alpha, f64::INFINITY).unwrap();
        let a: f64 = rng.gen_range(1e-6..1.0 - 1e-6);
        let b: f64 = rng.gen_range(1e-6..1.0 - 1e-6);
        let mid = reduced_objective(0.5 * (a + b), &levels, &p).unwrap();
        let chord = 0.5 * (reduced_objective(a, &levels, &p).unwrap() + reduced_objective(b, &levels, &p).unwrap());
        assert!(mid >= chord - 1e-9, "{mid} < {chord}");
    }
}

#[test]
fn reduced_objective_validates_input() {
    let p = instance(vec![5.0, 10.0], 1.0, 2.0, 0);
    let levels = vec![p.config.avg_power; 2];
    assert!(reduced_objective(0.0, &levels, &p).is_err());
    assert!(reduced_objective(1.0, &levels, &p).is_err());
    assert!(reduced_objective(0.5, &levels[..1], &p).is_err());
    assert!(reduced_objective(0.5, &[-1.0, 1.0], &p).is_err());
}

#[test]
fn transform_round_trip() {
    let s = Schedule {
        tau_d: 0.3,
        p_dl: vec![0.1, 0.2, 0.05],
        tau_ul: vec![0.2, 0.4, 0.1],
        p_ul: vec![1e-3, 2e-4, 5e-6],
    };
    let back = from_transformed(&to_transformed(&s).unwrap());
    for (a, b) in s.p_dl.iter().zip(&back.p_dl).chain(s.tau_ul.iter().zip(&back.tau_ul)).chain(s.p_ul.iter().zip(&back.p_ul)) {
        assert!((a - b).abs() <= 1e-15 * a.abs());
    }
    let mut zero = s.clone();
    zero.p_ul[1] = 0.0;
    assert!(to_transformed(&zero).is_err());
}

#[test]
fn transformed_origin_violates_time() {
    // Every variable equal to one: the time budget is exceeded by ln(K + 1).
    let p = instance(vec![5.0, 10.0], 1.0, 2.0, 0);
    let point = TransformedPoint {
        t_d: 0.0,
        t_ul: vec![0.0; 2],
        p_dl_log: vec![0.0; 2],
        p_ul_log: vec![0.0; 2],
    };
    let report = transformed_constraint_residuals(&point, &p).unwrap();
    let time = report.get(Constraint::TimeBudget, None).unwrap().value;
    assert!((time - 3f64.ln()).abs() < 1e-15);
    assert!(!report.feasible);
}

#[test]
fn transformed_feasibility_agrees() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut disagreements = 0;
    let mut feasible = 0;
    for trial in 0..2000u64 {
        let alpha = [0.3, 0.7, 1.0][(trial % 3) as usize];
        let p = instance(vec![5.0, 10.0, 15.0], alpha, 2.0, trial);
        let s = random_point(&p, &mut rng);
        let original = constraint_residuals(&s, &p.channel, &p.config).unwrap();
        let transformed = transformed_constraint_residuals(&to_transformed(&s).unwrap(), &p).unwrap();
        if original.max_residual.abs() <= 1e-9 || transformed.max_residual.abs() <= 1e-9 {
            continue;
        }
        feasible += original.feasible as usize;
        disagreements += (original.feasible != transformed.feasible) as usize;
    }
    assert_eq!(disagreements, 0);
    assert!(feasible > 200, "only {feasible} feasible probes");
}

/// A point near the tight schedule: half the probes are pulled strictly
/// inside, the rest jittered across the boundary.
fn random_point(p: &ProblemInstance, rng: &mut ChaCha8Rng) -> Schedule {
    let k = p.users();
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    let f = crate::plm::ScheduleFractions::new(raw.iter().map(|r| r / sum).collect()).unwrap_or_else(|_| crate::plm::ScheduleFractions::uniform(k));
    let total = p.config.power_budget() * rng.gen_range(0.5..1.0);
    let levels = crate::plm::encode_levels(&f, total, p.config.alpha, f64::INFINITY).unwrap();
    let tau_d = rng.gen_range(0.05..0.95);
    let mut s = schedule_from_levels(tau_d, &levels, p).unwrap();
    if rng.gen_bool(0.5) {
        // Pull every tight constraint inwards.
        s.tau_d *= rng.gen_range(0.9..1.0);
        for i in 0..k {
            s.tau_ul[i] *= rng.gen_range(0.9..1.0);
            s.p_ul[i] = (s.p_ul[i] * rng.gen_range(0.8..0.9)).max(1e-30);
        }
    } else {
        let jitter = |rng: &mut ChaCha8Rng| 1.0 + rng.gen_range(-0.02..0.02);
        s.tau_d *= jitter(rng);
        for i in 0..k {
            s.p_dl[i] *= jitter(rng);
            s.tau_ul[i] *= jitter(rng);
            s.p_ul[i] = (s.p_ul[i] * jitter(rng)).max(1e-30);
        }
    }
    s
}

#[test]
fn rate_at_downlink_peaks_at_solution() {
    let p = instance(vec![5.0, 10.0, 15.0], 0.5, 1.5, 2);
    let r = solve(&p, &quick()).unwrap();
    let at = rate_at_downlink(&p, r.schedule.tau_d).unwrap();
    assert!((at - r.objective).abs() <= 1e-9 * r.objective);
    for t in [0.1, 0.3, 0.5, 0.7, 0.9] {
        assert!(rate_at_downlink(&p, t).unwrap() <= r.objective * (1.0 + 1e-12));
    }
    assert!(rate_at_downlink(&p, 1.0).is_err());
}

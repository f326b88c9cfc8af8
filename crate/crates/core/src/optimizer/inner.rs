//! Inner maximization at a fixed downlink duration.
//!
//! Levels are written as `P_i = S ((1 - α)/K + α f_i)`: the users decode `f`
//! exactly and harvest in proportion to the total `S`. For a fixed `S` the
//! split problem is concave when no circuit power is drawn, and its optimum
//! gives every uncapped user the same SNR, so the split follows the channel
//! product `h_dl h_ul` up to the peak cap. With circuit power the split is
//! refined by projected gradient ascent from that point. The total is searched
//! on `[S_lo, K P_A]`; below `S_lo` the peak never binds and more power is
//! strictly better.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::projection::{project_onto_power_polytope, project_weighted};
use super::search::maximize_scalar;
use super::{objective_from_split, ProblemInstance, SolveOptions};

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
/// Durations are floored here when differentiating; the rate is flat in the
/// limit but its slope diverges.
const MIN_DURATION: f64 = 1e-16;
/// Largest ratio between the biggest and smallest coordinate scaling.
const SCALING_RANGE: f64 = 1e6;
const TOTAL_GRID: usize = 8;
const TOTAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) struct InnerResult {
    pub total: f64,
    pub split: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

pub(crate) struct InnerSolver<'a> {
    problem: &'a ProblemInstance,
    budget: f64,
    /// `(1 - α) / K`.
    floor: f64,
    weights: Vec<f64>,
    circuit_free: bool,
    restarts: usize,
    max_iterations: usize,
    seed: u64,
    iterations: usize,
}

/// Slopes of `T ln(1 + h (E/T - pc)/N0)` with respect to duration `T`, plus
/// the second derivative.
fn rate_partials(duration: f64, energy: f64, h: f64, circuit: f64, noise: f64) -> (f64, f64) {
    if h == 0.0 || energy == 0.0 {
        return (0.0, 0.0);
    }
    let t = duration.max(MIN_DURATION);
    let u = h * energy / (t * noise);
    let x = u - h * circuit / noise;
    if x <= 0.0 {
        return (0.0, 0.0);
    }
    let ratio = u / (1.0 + x);
    (x.ln_1p() - ratio, -ratio * ratio / t)
}

/// `f_i = min(cap, λ w_i)` with `Σ f = 1`. Leftover time goes to zero-weight
/// users once every other user is capped.
pub(crate) fn water_fill(weights: &[f64], cap: f64, out: &mut [f64]) {
    let k = weights.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut capped = 0;
    while capped < k {
        let remaining = 1.0 - capped as f64 * cap;
        let rest: f64 = order[capped..].iter().map(|&i| weights[i]).sum();
        let top = weights[order[capped]];
        if rest > 0.0 && top * remaining / rest <= cap {
            let lambda = remaining / rest;
            for (o, w) in out.iter_mut().zip(weights) {
                *o = (lambda * w).min(cap);
            }
            for &i in &order[..capped] {
                out[i] = cap;
            }
            return;
        }
        if rest <= 0.0 {
            // Only zero-weight users left: share what remains evenly.
            let share = remaining / (k - capped) as f64;
            for &i in &order[..capped] {
                out[i] = cap;
            }
            for &i in &order[capped..] {
                out[i] = share;
            }
            return;
        }
        capped += 1;
    }
    out.iter_mut().for_each(|o| *o = cap);
}

impl<'a> InnerSolver<'a> {
    pub fn new(problem: &'a ProblemInstance, options: &SolveOptions) -> Self {
        let cfg = &problem.config;
        let k = problem.users();
        InnerSolver {
            problem,
            budget: cfg.power_budget(),
            floor: (1.0 - cfg.alpha) / k as f64,
            weights: problem
                .channel
                .h_dl
                .iter()
                .zip(&problem.channel.h_ul)
                .map(|(a, b)| a * b)
                .collect(),
            circuit_free: cfg.circuit_power.iter().all(|p| *p == 0.0),
            restarts: options.restarts,
            max_iterations: options.max_inner_iterations,
            seed: options.seed,
            iterations: 0,
        }
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Largest split a user may take at total `S`.
    fn cap(&self, total: f64) -> f64 {
        let alpha = self.problem.config.alpha;
        ((self.problem.config.peak_power / total - self.floor) / alpha).min(1.0)
    }

    /// Smallest total at which the peak can bind.
    fn lowest_total(&self) -> f64 {
        let alpha = self.problem.config.alpha;
        (self.problem.config.peak_power / (self.floor + alpha)).min(self.budget)
    }

    pub fn levels(&self, total: f64, split: &[f64]) -> Vec<f64> {
        let peak = self.problem.config.peak_power;
        let alpha = self.problem.config.alpha;
        split
            .iter()
            .map(|f| (total * (self.floor + alpha * f)).min(peak))
            .collect()
    }

    fn value(&self, tau_d: f64, total: f64, split: &[f64]) -> f64 {
        objective_from_split(tau_d, split, total, self.problem)
    }

    /// Best split at `(tau_d, total)` from the channel-proportional start.
    fn best_split(&mut self, tau_d: f64, total: f64) -> InnerResult {
        let cap = self.cap(total);
        let mut split = vec![0.0; self.weights.len()];
        water_fill(&self.weights, cap, &mut split);
        self.iterations += 1;
        if self.circuit_free {
            let value = self.value(tau_d, total, &split);
            return InnerResult {
                total,
                split,
                value,
                converged: true,
            };
        }
        self.ascend(tau_d, total, split)
    }

    /// Best total and split at downlink duration `tau_d`.
    pub fn maximize(&mut self, tau_d: f64) -> InnerResult {
        let at_budget = self.best_split(tau_d, self.budget);
        let cap = self.cap(self.budget);
        let binding = cap < 1.0 && at_budget.split.iter().any(|f| *f >= cap * (1.0 - 1e-12));
        let (lo, hi) = (self.lowest_total(), self.budget);
        if !binding || lo >= hi {
            return at_budget;
        }
        let searched = maximize_scalar(
            |s| {
                let r = self.best_split(tau_d, s);
                (r.value, r)
            },
            lo,
            hi,
            TOTAL_GRID,
            TOTAL_TOL * hi,
        );
        if searched.value > at_budget.value {
            searched.payload
        } else {
            at_budget
        }
    }

    /// Re-runs the split ascent at a fixed point from `restarts` random starts
    /// and keeps the best. Ties keep the incumbent.
    pub fn polish(&mut self, tau_d: f64, incumbent: InnerResult) -> InnerResult {
        let mut best = incumbent;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let k = self.weights.len();
        let total = best.total;
        let cap = self.cap(total);
        for _ in 0..self.restarts {
            let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            let start = project_onto_power_polytope(&raw, &vec![0.0; k], &vec![cap; k], 1.0, true)
                .expect("capped simplex holds the uniform split");
            // Pull halfway towards the uniform split to start strictly inside.
            let start: Vec<f64> = start.iter().map(|f| 0.5 * (f + 1.0 / k as f64)).collect();
            let candidate = self.ascend(tau_d, total, start);
            if candidate.value > best.value {
                best = candidate;
            }
        }
        best
    }

    fn gradient(&self, tau_d: f64, total: f64, split: &[f64], grad: &mut [f64], scaling: &mut [f64]) {
        let cfg = &self.problem.config;
        let channel = &self.problem.channel;
        let uplink = 1.0 - tau_d;
        let energy_scale = cfg.eta * tau_d * total / split.len() as f64;
        for (i, f) in split.iter().enumerate() {
            let (dt, dtt) = rate_partials(
                f * uplink,
                energy_scale * channel.h_dl[i],
                channel.h_ul[i],
                cfg.circuit_power[i],
                cfg.noise_power,
            );
            grad[i] = uplink * dt;
            scaling[i] = -uplink * uplink * dtt;
        }
        let mut largest = 0.0f64;
        for s in scaling.iter_mut() {
            *s = if *s > 0.0 { 1.0 / *s } else { f64::INFINITY };
            if s.is_finite() {
                largest = largest.max(*s);
            }
        }
        if largest == 0.0 {
            largest = 1.0;
        }
        for s in scaling.iter_mut() {
            *s = s.clamp(largest / SCALING_RANGE, largest);
        }
    }

    fn ascend(&mut self, tau_d: f64, total: f64, start: Vec<f64>) -> InnerResult {
        let k = start.len();
        let cap = self.cap(total);
        let lower = vec![0.0; k];
        let upper = vec![cap; k];
        let mut split = start;
        let mut value = self.value(tau_d, total, &split);
        let mut grad = vec![0.0; k];
        let mut scaling = vec![0.0; k];
        let mut trial = vec![0.0; k];
        let mut converged = false;

        for _ in 0..self.max_iterations {
            self.iterations += 1;
            self.gradient(tau_d, total, &split, &mut grad, &mut scaling);
            let mut beta = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                for i in 0..k {
                    trial[i] = split[i] + beta * scaling[i] * grad[i];
                }
                let q = project_weighted(&trial, &scaling, &lower, &upper, 1.0, true)
                    .expect("capped simplex is non-empty");
                let ascent: f64 = (0..k).map(|i| grad[i] * (q[i] - split[i])).sum();
                if !(ascent > 0.0) {
                    break;
                }
                let q_value = self.value(tau_d, total, &q);
                if q_value >= value + ARMIJO * ascent {
                    accepted = Some((q, q_value));
                    break;
                }
                beta *= 0.5;
            }
            let Some((q, q_value)) = accepted else {
                converged = true;
                break;
            };
            let step = q
                .iter()
                .zip(&split)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            let gain = q_value - value;
            split = q;
            value = q_value;
            if step <= 1e-14 || gain <= 1e-15 * value.abs() {
                converged = true;
                break;
            }
        }
        InnerResult {
            total,
            split,
            value,
            converged,
        }
    }
}

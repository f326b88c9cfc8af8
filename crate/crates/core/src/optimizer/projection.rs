//! Projection onto the downlink power polytope
//! `{ lower ≤ p ≤ upper, Σ p ≤ budget }` (or `Σ p = budget`).
//!
//! The projection in the metric `Σ (q_i - y_i)² / w_i` has the form
//! `q_i = clamp(y_i - λ w_i, lower_i, upper_i)`; `Σ q(λ)` is monotone in `λ`,
//! so the multiplier is found by bisection.

use crate::error::{Result, WpcnError};

const BISECTION_STEPS: usize = 200;

struct Clamp {
    sum: f64,
    free_y: f64,
    free_w: f64,
    fixed: f64,
}

fn clamped(y: &[f64], w: &[f64], lower: &[f64], upper: &[f64], lambda: f64, out: &mut [f64]) -> Clamp {
    let mut c = Clamp {
        sum: 0.0,
        free_y: 0.0,
        free_w: 0.0,
        fixed: 0.0,
    };
    for i in 0..y.len() {
        let raw = y[i] - lambda * w[i];
        let q = if raw <= lower[i] {
            c.fixed += lower[i];
            lower[i]
        } else if raw >= upper[i] {
            c.fixed += upper[i];
            upper[i]
        } else {
            c.free_y += y[i];
            c.free_w += w[i];
            raw
        };
        out[i] = q;
        c.sum += q;
    }
    c
}

/// Weighted projection; `weights` must be positive. With `equality` the sum
/// constraint is held tight.
pub fn project_weighted(
    y: &[f64],
    weights: &[f64],
    lower: &[f64],
    upper: &[f64],
    budget: f64,
    equality: bool,
) -> Result<Vec<f64>> {
    let k = y.len();
    if weights.len() != k || lower.len() != k || upper.len() != k {
        return Err(WpcnError::domain("projection inputs must share one length"));
    }
    if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(WpcnError::domain("projection weights must be positive"));
    }
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return Err(WpcnError::domain("projection box is empty"));
    }
    let low_sum: f64 = lower.iter().sum();
    let high_sum: f64 = upper.iter().sum();
    let slack = 1e-12 * budget.abs().max(1e-300);
    if low_sum > budget + slack || (equality && high_sum < budget - slack) {
        return Err(WpcnError::domain("power polytope is empty"));
    }

    let mut out = vec![0.0; k];
    let at_zero = clamped(y, weights, lower, upper, 0.0, &mut out).sum;
    if (!equality && at_zero <= budget) || at_zero == budget {
        return Ok(out);
    }

    // Bracket the multiplier: Σ q(λ) is nonincreasing in λ.
    let spread = y
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(yi, (l, u))| (yi - l).abs().max((yi - u).abs()))
        .fold(0.0f64, f64::max);
    let w_min = weights.iter().cloned().fold(f64::INFINITY, f64::min);
    let reach = (spread / w_min).max(1e-300) * 2.0;
    let (mut lo, mut hi) = if at_zero > budget { (0.0, reach) } else { (-reach, 0.0) };

    let tol = 1e-15 * budget.abs().max(1e-300);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let c = clamped(y, weights, lower, upper, mid, &mut out);
        if c.sum > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        // Σ q is linear in λ between breakpoints: once the bracket holds a single
        // active set, the multiplier follows in closed form.
        if c.free_w > 0.0 {
            let exact = (c.free_y + c.fixed - budget) / c.free_w;
            if exact >= lo && exact <= hi {
                let check = clamped(y, weights, lower, upper, exact, &mut out).sum;
                if (check - budget).abs() <= tol {
                    return Ok(out);
                }
            }
        }
    }
    // Take the side that respects the budget.
    clamped(y, weights, lower, upper, hi, &mut out);
    Ok(out)
}

/// Euclidean projection onto the power polytope.
pub fn project_onto_power_polytope(
    y: &[f64],
    lower: &[f64],
    upper: &[f64],
    budget: f64,
    equality: bool,
) -> Result<Vec<f64>> {
    project_weighted(y, &vec![1.0; y.len()], lower, upper, budget, equality)
}

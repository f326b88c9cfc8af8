//! One-dimensional maximization: a coarse scan to bracket the peak, then
//! golden-section refinement inside the bracket.

/// Best point found by [`maximize_scalar`], with whatever the objective
/// attached to it.
#[derive(Debug, Clone)]
pub struct ScalarMax<T> {
    pub x: f64,
    pub value: f64,
    pub payload: T,
    pub evaluations: usize,
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

struct Tracker<T> {
    best: Option<(f64, f64, T)>,
    evaluations: usize,
}

impl<T> Tracker<T> {
    fn eval<F: FnMut(f64) -> (f64, T)>(&mut self, f: &mut F, x: f64) -> f64 {
        let (value, payload) = f(x);
        self.evaluations += 1;
        let replace = match &self.best {
            None => true,
            Some((bx, bv, _)) => value > *bv || (value == *bv && x < *bx),
        };
        if replace {
            self.best = Some((x, value, payload));
        }
        value
    }
}

/// Maximizes `f` on the open interval `(lo, hi)`.
///
/// `grid` interior points are scanned first; golden-section then shrinks the
/// bracket around the best of them until it is narrower than `tol`. The best
/// point ever evaluated is returned (ties go to the smaller `x`), so a
/// non-unimodal objective can only lose accuracy, never return a worse point
/// than the scan found.
pub fn maximize_scalar<T, F>(mut f: F, lo: f64, hi: f64, grid: usize, tol: f64) -> ScalarMax<T>
where
    F: FnMut(f64) -> (f64, T),
{
    assert!(hi > lo, "empty search interval");
    let grid = grid.max(1);
    let mut tracker = Tracker {
        best: None,
        evaluations: 0,
    };
    let step = (hi - lo) / (grid + 1) as f64;
    let mut best_k = 1;
    let mut best_v = f64::NEG_INFINITY;
    for k in 1..=grid {
        let v = tracker.eval(&mut f, lo + step * k as f64);
        if v > best_v {
            best_v = v;
            best_k = k;
        }
    }

    let mut a = lo + step * (best_k - 1) as f64;
    let mut b = lo + step * (best_k + 1) as f64;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = tracker.eval(&mut f, c);
    let mut fd = tracker.eval(&mut f, d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = tracker.eval(&mut f, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = tracker.eval(&mut f, d);
        }
    }

    let (x, value, payload) = tracker.best.expect("at least one evaluation");
    ScalarMax {
        x,
        value,
        payload,
        evaluations: tracker.evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_peak() {
        let r = maximize_scalar(|x| (-(x - 0.3141).powi(2), ()), 0.0, 1.0, 16, 1e-9);
        assert!((r.x - 0.3141).abs() < 1e-8, "{}", r.x);
    }

    #[test]
    fn peak_near_boundary() {
        let r = maximize_scalar(|x| (x, ()), 0.0, 1.0, 8, 1e-10);
        assert!(r.x > 1.0 - 1e-9);
        let r = maximize_scalar(|x| (-x, ()), 0.0, 1.0, 8, 1e-10);
        assert!(r.x < 1e-9);
    }

    #[test]
    fn scan_rescues_multimodal() {
        // Narrow tall peak at 0.8 next to a broad low one at 0.2.
        let f = |x: f64| {
            let v = (-(x - 0.2f64).powi(2) * 10.0).exp() + 2.0 * (-(x - 0.8f64).powi(2) * 400.0).exp();
            (v, ())
        };
        let r = maximize_scalar(f, 0.0, 1.0, 64, 1e-9);
        let dense = (0..=1_000_000)
            .map(|i| i as f64 * 1e-6)
            .max_by(|a, b| f(*a).0.total_cmp(&f(*b).0))
            .unwrap();
        assert!((r.x - dense).abs() < 2e-6, "{} vs {dense}", r.x);
        assert!(r.value >= f(dense).0 - 1e-12);
    }

    #[test]
    fn payload_follows_best() {
        let r = maximize_scalar(|x| (-(x - 0.5).abs(), x * 2.0), 0.0, 1.0, 9, 1e-9);
        assert!((r.payload - 2.0 * r.x).abs() < 1e-15);
    }
}

//! Power level modulation: the uplink schedule rides on the relative power of
//! the K downlink energy subslots.
//!
//! The access point places `(1 - α)` times the mean level in every subslot and
//! spreads the rest in proportion to the uplink fractions. A user only sees
//! its own harvested energy per subslot, `η h_i τ_d / K · P_j`, but the common
//! factor cancels in the ratios, so every user recovers the same fractions.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WpcnError};
use crate::physics::SystemConfig;

const SUM_TOL: f64 = 1e-12;

/// Shares of the uplink period, one per user, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFractions(Vec<f64>);

impl ScheduleFractions {
    pub fn new(fractions: Vec<f64>) -> Result<Self> {
        if fractions.is_empty() {
            return Err(WpcnError::domain("schedule needs at least one user"));
        }
        if fractions.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(WpcnError::domain("schedule fractions must be non-negative"));
        }
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(WpcnError::domain(format!(
                "schedule fractions must sum to 1 (got {sum})"
            )));
        }
        Ok(ScheduleFractions(fractions))
    }

    pub fn uniform(users: usize) -> Self {
        ScheduleFractions(vec![1.0 / users as f64; users])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn users(&self) -> usize {
        self.0.len()
    }
}

/// Per-subslot energies harvested by one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredEnergies(Vec<f64>);

impl MeasuredEnergies {
    pub fn new(energies: Vec<f64>) -> Result<Self> {
        if energies.is_empty() {
            return Err(WpcnError::domain("need at least one subslot energy"));
        }
        if energies.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(WpcnError::domain("measured energies must be non-negative"));
        }
        Ok(MeasuredEnergies(energies))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(WpcnError::domain(format!(
            "dynamic range index must lie in (0, 1], got {alpha}"
        )));
    }
    Ok(())
}

/// Downlink levels with total `total` that carry `fractions`:
/// `P_i = total · ((1 - α)/K + α f_i)`.
pub fn encode_levels(fractions: &ScheduleFractions, total: f64, alpha: f64, peak_power: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if !(total > 0.0 && total.is_finite()) {
        return Err(WpcnError::domain(format!("total downlink level must be positive, got {total}")));
    }
    let k = fractions.users() as f64;
    let floor = (1.0 - alpha) / k;
    let mut levels = Vec::with_capacity(fractions.users());
    for (user, &f) in fractions.as_slice().iter().enumerate() {
        let level = total * (floor + alpha * f);
        if level > peak_power * (1.0 + SUM_TOL) {
            return Err(WpcnError::UnrepresentableSchedule {
                user,
                level,
                peak: peak_power,
            });
        }
        levels.push(level.min(peak_power));
    }
    Ok(levels)
}

/// Downlink levels that carry `fractions` while spending the full budget
/// `K P_A`.
pub fn encode_schedule(fractions: &ScheduleFractions, config: &SystemConfig) -> Result<Vec<f64>> {
    let k = fractions.users();
    if k != config.users() {
        return Err(WpcnError::domain(format!(
            "schedule has {k} users but config has {}",
            config.users()
        )));
    }
    encode_levels(fractions, config.power_budget(), config.alpha, config.peak_power)
}

/// Recovers the uplink fractions from one user's per-subslot energies.
///
/// Energies below the constant floor (only possible with measurement noise or
/// a mismatched `α`) are clamped to zero and the rest renormalized.
pub fn decode_schedule(energies: &MeasuredEnergies, alpha: f64) -> Result<ScheduleFractions> {
    check_alpha(alpha)?;
    let e = energies.as_slice();
    let k = e.len() as f64;
    let total: f64 = e.iter().sum();
    if !(total > 0.0) {
        return Err(WpcnError::NoEnergy);
    }
    let common = (1.0 - alpha) / k * total;
    let mut fractions: Vec<f64> = e
        .iter()
        .map(|&ej| ((ej - common) / (alpha * total)).max(0.0))
        .collect();
    let sum: f64 = fractions.iter().sum();
    if sum > 0.0 {
        fractions.iter_mut().for_each(|f| *f /= sum);
    } else {
        // Every subslot sits at the floor: nothing distinguishes the users.
        fractions.iter_mut().for_each(|f| *f = 1.0 / k);
    }
    Ok(ScheduleFractions(fractions))
}

/// Largest dynamic range index for which a single-user schedule stays below
/// the peak power.
pub fn max_alpha(users: usize, peak_power: f64, avg_power: f64) -> f64 {
    if users < 2 {
        return 1.0;
    }
    ((peak_power / avg_power - 1.0) / (users as f64 - 1.0)).clamp(0.0, 1.0)
}

/// How many users a given dynamic range index supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UserLimit {
    Bounded(usize),
    Unlimited,
}

pub fn max_users(alpha: f64, peak_power: f64, avg_power: f64) -> UserLimit {
    if alpha <= 0.0 {
        return UserLimit::Unlimited;
    }
    // The ratio usually comes from dBm conversions; absorb the rounding before flooring.
    let raw = (peak_power / avg_power - 1.0) / alpha + 1.0;
    UserLimit::Bounded((raw + 1e-9).floor().max(0.0) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Topology;
    use crate::physics::harvested_energy_subslot;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn config(k: usize, alpha: f64, pa: f64, pp: f64) -> SystemConfig {
        SystemConfig {
            avg_power: pa,
            peak_power: pp,
            alpha,
            eta: 0.5,
            noise_power: 1e-19,
            circuit_power: vec![0.0; k],
            energy_budget: None,
            topology: Topology::new(vec![10.0; k], 2.0).unwrap(),
        }
    }

    fn fractions(v: &[f64]) -> ScheduleFractions {
        ScheduleFractions::new(v.to_vec()).unwrap()
    }

    #[test]
    fn encode_two_users() {
        let cfg = config(2, 0.5, 2.0, 10.0);
        let p = encode_schedule(&fractions(&[0.75, 0.25]), &cfg).unwrap();
        assert_relative_eq!(p[0], 2.5, max_relative = 1e-15);
        assert_relative_eq!(p[1], 1.5, max_relative = 1e-15);
    }

    #[test]
    fn encode_uniform_gives_average_power() {
        for alpha in [0.1, 0.5, 1.0] {
            let cfg = config(4, alpha, 0.1, 0.4);
            let p = encode_schedule(&ScheduleFractions::uniform(4), &cfg).unwrap();
            for level in p {
                assert_relative_eq!(level, 0.1, max_relative = 1e-15);
            }
        }
    }

    #[test]
    fn encode_at_max_alpha_hits_peak() {
        let (pa, pp) = (1.0, 4.0);
        let alpha = max_alpha(5, pp, pa);
        let cfg = config(5, alpha, pa, pp);
        let p = encode_schedule(&fractions(&[1.0, 0.0, 0.0, 0.0, 0.0]), &cfg).unwrap();
        assert_eq!(p[0], pp);
    }

    #[test]
    fn encode_rejects_peak_violation() {
        let cfg = config(5, 1.0, 1.0, 4.0);
        let err = encode_schedule(&fractions(&[0.1, 0.9, 0.0, 0.0, 0.0]), &cfg).unwrap_err();
        assert!(matches!(err, WpcnError::UnrepresentableSchedule { user: 1, .. }));
        let mut zero_alpha = cfg.clone();
        zero_alpha.alpha = 0.0;
        assert!(encode_schedule(&ScheduleFractions::uniform(5), &zero_alpha).is_err());
    }

    #[test]
    fn decode_examples() {
        let e = MeasuredEnergies::new(vec![2.5, 1.5]).unwrap();
        assert_eq!(decode_schedule(&e, 0.5).unwrap().as_slice(), &[0.75, 0.25]);
        let scaled = MeasuredEnergies::new(vec![2.5e-7, 1.5e-7]).unwrap();
        let f = decode_schedule(&scaled, 0.5).unwrap();
        assert_relative_eq!(f.as_slice()[0], 0.75, max_relative = 1e-14);
        assert_relative_eq!(f.as_slice()[1], 0.25, max_relative = 1e-14);
        let flat = MeasuredEnergies::new(vec![3.0; 4]).unwrap();
        for f in decode_schedule(&flat, 0.3).unwrap().as_slice() {
            assert_relative_eq!(*f, 0.25, max_relative = 1e-15);
        }
    }

    #[test]
    fn decode_errors() {
        let zero = MeasuredEnergies::new(vec![0.0, 0.0]).unwrap();
        assert_eq!(decode_schedule(&zero, 0.5), Err(WpcnError::NoEnergy));
        let e = MeasuredEnergies::new(vec![1.0, 2.0]).unwrap();
        assert!(decode_schedule(&e, 0.0).is_err());
        assert!(decode_schedule(&e, 1.2).is_err());
        assert!(MeasuredEnergies::new(vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn decode_clamps_below_floor() {
        // With α = 0.2 the floor share is 0.8/3 of the total; user 2 is below it.
        let e = MeasuredEnergies::new(vec![5.0, 4.0, 0.1]).unwrap();
        let f = decode_schedule(&e, 0.2).unwrap();
        assert_eq!(f.as_slice()[2], 0.0);
        assert_relative_eq!(f.as_slice().iter().sum::<f64>(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn max_alpha_examples() {
        assert_relative_eq!(max_alpha(5, 4.0, 1.0), 0.75, max_relative = 1e-15);
        assert_eq!(max_alpha(2, 1.0, 1.0), 0.0);
        assert_eq!(max_alpha(4, 4.0, 1.0), 1.0);
        assert_eq!(max_alpha(7, 40.0, 1.0), 1.0);
        assert_eq!(max_alpha(1, 1.0, 1.0), 1.0);
    }

    #[test]
    fn max_users_examples() {
        assert_eq!(max_users(0.3, 4.0, 1.0), UserLimit::Bounded(11));
        assert_eq!(max_users(0.3, 0.4, 0.1), UserLimit::Bounded(11));
        assert_eq!(max_users(1.0, 4.0, 1.0), UserLimit::Bounded(4));
        assert_eq!(max_users(1.0, 1.0, 1.0), UserLimit::Bounded(1));
        assert_eq!(max_users(0.0, 4.0, 1.0), UserLimit::Unlimited);
    }

    fn arb_fractions(k: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, k).prop_map(|raw| {
            let s: f64 = raw.iter().sum();
            if s == 0.0 {
                vec![1.0 / raw.len() as f64; raw.len()]
            } else {
                raw.iter().map(|x| x / s).collect()
            }
        })
    }

    proptest! {
        #[test]
        fn round_trip_and_consensus(
            (k, f) in (2usize..8).prop_flat_map(|k| (Just(k), arb_fractions(k))),
            alpha in 0.01f64..=1.0,
            gains in prop::collection::vec(1e-8f64..1.0, 8),
            tau_d in 0.01f64..0.99,
        ) {
            let f = ScheduleFractions(f);
            // Peak high enough that every split is representable.
            let cfg = config(k, alpha, 0.1, 0.1 * (1.0 + alpha * k as f64));
            let levels = encode_schedule(&f, &cfg).unwrap();
            let sum: f64 = levels.iter().sum();
            prop_assert!((sum - cfg.power_budget()).abs() <= 1e-12 * cfg.power_budget());
            for &h in &gains[..k] {
                let e: Vec<f64> = levels
                    .iter()
                    .map(|&p| harvested_energy_subslot(h, p, tau_d, k, cfg.eta).unwrap())
                    .collect();
                let decoded = decode_schedule(&MeasuredEnergies(e), alpha).unwrap();
                for (a, b) in decoded.as_slice().iter().zip(f.as_slice()) {
                    prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
                }
            }
        }

        #[test]
        fn decode_is_total(e in prop::collection::vec(0.0f64..10.0, 1..10), alpha in 0.001f64..=1.0) {
            let m = MeasuredEnergies::new(e.clone()).unwrap();
            match decode_schedule(&m, alpha) {
                Ok(f) => {
                    prop_assert!(f.as_slice().iter().all(|x| *x >= 0.0));
                    prop_assert!((f.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                }
                Err(err) => {
                    prop_assert_eq!(err, WpcnError::NoEnergy);
                    prop_assert!(e.iter().sum::<f64>() == 0.0);
                }
            }
        }

        #[test]
        fn alpha_and_user_bounds_are_dual(k in 2usize..40, ppr in 1.0f64..20.0) {
            let alpha = max_alpha(k, ppr, 1.0);
            if alpha > 0.0 {
                match max_users(alpha, ppr, 1.0) {
                    UserLimit::Bounded(n) => prop_assert!(k <= n, "k {k} n {n}"),
                    UserLimit::Unlimited => {}
                }
            }
        }
    }
}

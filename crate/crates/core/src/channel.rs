//! Quasi-static fading channels with distance-dependent path loss.
//!
//! A realization is a pure function of `(topology, base_seed, trial_index)`:
//! every trial owns its own ChaCha stream, so Monte Carlo runs give the same
//! gains whatever order or thread the trials are evaluated on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WpcnError};

/// User placement around the access point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    /// Distance of each user from the access point, in meters.
    pub distances: Vec<f64>,
    pub path_loss_exponent: f64,
}

impl Topology {
    pub fn new(distances: Vec<f64>, path_loss_exponent: f64) -> Result<Self> {
        let topology = Topology {
            distances,
            path_loss_exponent,
        };
        topology.validate()?;
        Ok(topology)
    }

    pub fn validate(&self) -> Result<()> {
        if self.distances.is_empty() {
            return Err(WpcnError::config("distances", "must list at least one user"));
        }
        if let Some(i) = self
            .distances
            .iter()
            .position(|d| !(d.is_finite() && *d > 0.0))
        {
            return Err(WpcnError::config(
                format!("distances[{i}]"),
                "must be a positive finite length",
            ));
        }
        if !(self.path_loss_exponent.is_finite() && self.path_loss_exponent > 0.0) {
            return Err(WpcnError::config("gamma", "must be positive"));
        }
        Ok(())
    }

    pub fn users(&self) -> usize {
        self.distances.len()
    }
}

/// Per-user power gains for one block. Uplink and downlink are reciprocal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub h_dl: Vec<f64>,
    pub h_ul: Vec<f64>,
    /// `(base_seed, trial_index)` that produced the draw, if sampled.
    pub seed_tag: Option<(u64, u64)>,
}

impl ChannelRealization {
    /// Builds a reciprocal channel from explicit gains.
    ///
    /// Zero gains are accepted so that degenerate users can be modelled; sampled
    /// channels are always strictly positive.
    pub fn from_gains(gains: Vec<f64>) -> Result<Self> {
        if gains.is_empty() {
            return Err(WpcnError::domain("channel needs at least one user"));
        }
        if let Some(i) = gains.iter().position(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(WpcnError::domain(format!(
                "channel gain {i} must be finite and non-negative"
            )));
        }
        Ok(ChannelRealization {
            h_ul: gains.clone(),
            h_dl: gains,
            seed_tag: None,
        })
    }

    pub fn users(&self) -> usize {
        self.h_dl.len()
    }
}

/// Deterministic part of the gain, `distance^-γ`.
pub fn path_loss_gain(distance: f64, path_loss_exponent: f64) -> Result<f64> {
    if !(distance.is_finite() && distance > 0.0) {
        return Err(WpcnError::domain(format!(
            "distance must be positive, got {distance}"
        )));
    }
    if !(path_loss_exponent.is_finite() && path_loss_exponent > 0.0) {
        return Err(WpcnError::domain(format!(
            "path loss exponent must be positive, got {path_loss_exponent}"
        )));
    }
    Ok(distance.powf(-path_loss_exponent))
}

/// The random stream owned by one trial.
pub fn trial_rng(base_seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(trial_index);
    rng
}

/// Unit-mean exponential draw by inversion. `u` is drawn from `[0, 1)` so the
/// result is always finite.
pub fn unit_exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln()
}

/// Draws one Rayleigh-faded realization: `h_i = β_i² · D_i^-γ` with `β_i²` ~ Exp(1).
pub fn sample_channel(
    topology: &Topology,
    base_seed: u64,
    trial_index: u64,
) -> Result<ChannelRealization> {
    topology.validate()?;
    let mut rng = trial_rng(base_seed, trial_index);
    let mut h_dl = Vec::with_capacity(topology.users());
    for &d in &topology.distances {
        let mut fading = unit_exponential(&mut rng);
        // -ln(1) = 0 happens with probability 2^-53; keep gains strictly positive.
        while fading == 0.0 {
            fading = unit_exponential(&mut rng);
        }
        h_dl.push(fading * path_loss_gain(d, topology.path_loss_exponent)?);
    }
    Ok(ChannelRealization {
        h_ul: h_dl.clone(),
        h_dl,
        seed_tag: Some((base_seed, trial_index)),
    })
}

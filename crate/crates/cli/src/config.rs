//! Flat JSON configuration files. Powers are in dBm, distances in meters.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use wpcn_core::physics::{dbm_to_watt, SystemConfig};
use wpcn_core::{Topology, WpcnError};

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PerUser {
    One(f64),
    Each(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Optional; must match the number of distances when given.
    #[serde(rename = "K")]
    pub users: Option<usize>,
    pub pa_dbm: f64,
    /// Peak power; defaults to `pa_dbm` plus the ratio when `ppr` is given.
    pub pp_dbm: Option<f64>,
    pub ppr: Option<f64>,
    pub alpha: f64,
    pub eta: f64,
    pub n0_dbm: f64,
    pub gamma: f64,
    pub distances: Vec<f64>,
    /// Circuit power, one value for everyone or one per user. Absent means zero.
    pub pc_dbm: Option<PerUser>,
    /// Downlink energy budget in joules.
    pub e_d: Option<f64>,
    /// Sweep axes for `sweep --preset custom`.
    pub sweep_k: Option<Vec<usize>>,
    pub sweep_alpha: Option<Vec<f64>>,
    pub sweep_ppr: Option<Vec<f64>>,
    pub fill_distance: Option<f64>,
}

/// Every power of a loaded config in both units.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    #[serde(rename = "K")]
    pub users: usize,
    pub pa_dbm: f64,
    pub pa_w: f64,
    pub pp_dbm: f64,
    pub pp_w: f64,
    pub ppr: f64,
    pub alpha: f64,
    pub eta: f64,
    pub n0_dbm: f64,
    pub n0_w: f64,
    pub gamma: f64,
    pub distances: Vec<f64>,
    pub pc_w: Vec<f64>,
    pub e_d: Option<f64>,
}

impl ConfigEcho {
    pub fn new(cfg: &SystemConfig) -> Self {
        let dbm = wpcn_core::physics::watt_to_dbm;
        ConfigEcho {
            users: cfg.users(),
            pa_dbm: dbm(cfg.avg_power),
            pa_w: cfg.avg_power,
            pp_dbm: dbm(cfg.peak_power),
            pp_w: cfg.peak_power,
            ppr: cfg.peak_power / cfg.avg_power,
            alpha: cfg.alpha,
            eta: cfg.eta,
            n0_dbm: dbm(cfg.noise_power),
            n0_w: cfg.noise_power,
            gamma: cfg.topology.path_loss_exponent,
            distances: cfg.topology.distances.clone(),
            pc_w: cfg.circuit_power.clone(),
            e_d: cfg.energy_budget,
        }
    }
}

/// Core validation names fields after the model; report them by their file names.
fn file_field(field: &str) -> String {
    match field {
        "pa" => "pa_dbm".into(),
        "pp" => "pp_dbm".into(),
        "n0" => "n0_dbm".into(),
        "pc" => "pc_dbm".into(),
        "gamma" | "distances" | "alpha" | "eta" | "e_d" => field.into(),
        other if other.starts_with("pc[") => other.replacen("pc", "pc_dbm", 1),
        other => other.into(),
    }
}

pub fn rename_fields(err: WpcnError) -> WpcnError {
    match err {
        WpcnError::InvalidConfig { field, constraint } => WpcnError::InvalidConfig {
            field: file_field(&field),
            constraint,
        },
        other => other,
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("malformed config {}", path.display()))
    }

    pub fn system_config(&self) -> Result<SystemConfig, WpcnError> {
        let k = self.distances.len();
        if let Some(users) = self.users {
            if users != k {
                return Err(WpcnError::InvalidConfig {
                    field: "K".into(),
                    constraint: format!("is {users} but {k} distances are listed"),
                });
            }
        }
        let pp_dbm = match (self.pp_dbm, self.ppr) {
            (Some(pp), None) => pp,
            (None, Some(ratio)) if ratio > 0.0 => self.pa_dbm + 10.0 * ratio.log10(),
            (None, Some(_)) => {
                return Err(WpcnError::InvalidConfig {
                    field: "ppr".into(),
                    constraint: "must be positive".into(),
                })
            }
            _ => {
                return Err(WpcnError::InvalidConfig {
                    field: "pp_dbm".into(),
                    constraint: "exactly one of pp_dbm and ppr must be given".into(),
                })
            }
        };
        let circuit_power = match &self.pc_dbm {
            None => vec![0.0; k],
            Some(PerUser::One(p)) => vec![dbm_to_watt(*p); k],
            Some(PerUser::Each(ps)) => ps.iter().map(|p| dbm_to_watt(*p)).collect(),
        };
        let avg_power = dbm_to_watt(self.pa_dbm);
        let mut peak_power = dbm_to_watt(pp_dbm);
        if let Some(ratio) = self.ppr {
            peak_power = ratio * avg_power;
        }
        let cfg = SystemConfig {
            avg_power,
            peak_power,
            alpha: self.alpha,
            eta: self.eta,
            noise_power: dbm_to_watt(self.n0_dbm),
            circuit_power,
            energy_budget: self.e_d,
            topology: Topology {
                distances: self.distances.clone(),
                path_loss_exponent: self.gamma,
            },
        };
        cfg.validate().map_err(rename_fields)?;
        Ok(cfg)
    }
}

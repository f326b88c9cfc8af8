//! Browser bindings: the level codec, a single solve, and the sum rate as a
//! function of the downlink duration. Every export takes and returns JSON text.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;
use wpcn_core::baseline::{era_objective, era_optimize};
use wpcn_core::optimizer::rate_at_downlink;
use wpcn_core::physics::{dbm_to_watt, harvested_energy_subslot, SystemConfig};
use wpcn_core::plm::encode_levels;
use wpcn_core::{
    decode_schedule, sample_channel, solve, ChannelRealization, MeasuredEnergies,
    ProblemInstance, ScheduleFractions, SolveOptions, SolveResult, Topology, WpcnError,
};

#[derive(Debug, Clone, Deserialize)]
pub struct DemoConfig {
    pub pa_dbm: f64,
    pub ppr: f64,
    pub alpha: f64,
    pub distances: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub trial: u64,
}

impl DemoConfig {
    fn system(&self) -> Result<SystemConfig, WpcnError> {
        let avg_power = dbm_to_watt(self.pa_dbm);
        let cfg = SystemConfig {
            avg_power,
            peak_power: self.ppr * avg_power,
            alpha: self.alpha,
            eta: 0.5,
            noise_power: dbm_to_watt(-160.0),
            circuit_power: vec![0.0; self.distances.len()],
            energy_budget: None,
            topology: Topology::new(self.distances.clone(), 2.0)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn problem(&self) -> Result<(SystemConfig, ChannelRealization), WpcnError> {
        let cfg = self.system()?;
        let channel = sample_channel(&cfg.topology, self.seed, self.trial)?;
        Ok((cfg, channel))
    }
}

#[derive(Debug, Serialize)]
pub struct CodecView {
    /// Levels relative to the average power.
    pub levels: Vec<f64>,
    /// One row per user: harvested energy in each subslot, then the decode.
    pub energies: Vec<Vec<f64>>,
    pub decoded: Vec<Vec<f64>>,
}

/// Encodes `fractions` at unit average power and decodes them as each user
/// with gain `gains[i]` would.
pub fn codec_view(fractions: &[f64], alpha: f64, gains: &[f64]) -> Result<CodecView, WpcnError> {
    let f = ScheduleFractions::new(fractions.to_vec())?;
    let k = f.users();
    let levels = encode_levels(&f, k as f64, alpha, f64::INFINITY)?;
    let mut energies = Vec::with_capacity(gains.len());
    let mut decoded = Vec::with_capacity(gains.len());
    for &h in gains {
        let e: Vec<f64> = levels
            .iter()
            .map(|p| harvested_energy_subslot(h, *p, 0.5, k, 0.5))
            .collect::<Result<_, _>>()?;
        decoded.push(decode_schedule(&MeasuredEnergies::new(e.clone())?, alpha)?.into_vec());
        energies.push(e);
    }
    Ok(CodecView {
        levels,
        energies,
        decoded,
    })
}

#[derive(Debug, Serialize)]
pub struct SolveView {
    pub channel: ChannelRealization,
    pub proposed: SolveResult,
    pub era: SolveResult,
}

pub fn solve_view(config: &DemoConfig) -> Result<SolveView, WpcnError> {
    let (cfg, channel) = config.problem()?;
    let era = era_optimize(&channel, &cfg)?;
    let problem = ProblemInstance::new(channel.clone(), cfg)?;
    let proposed = solve(
        &problem,
        &SolveOptions {
            restarts: 2,
            ..SolveOptions::default()
        },
    )?;
    Ok(SolveView {
        channel,
        proposed,
        era,
    })
}

#[derive(Debug, Serialize)]
pub struct Curves {
    pub tau_d: Vec<f64>,
    pub proposed: Vec<f64>,
    pub era: Vec<f64>,
}

pub fn rate_curves(config: &DemoConfig, points: usize) -> Result<Curves, WpcnError> {
    if points < 2 {
        return Err(WpcnError::Domain("need at least two curve points".into()));
    }
    let (cfg, channel) = config.problem()?;
    let problem = ProblemInstance::new(channel.clone(), cfg.clone())?;
    let tau_d: Vec<f64> = (1..=points).map(|i| i as f64 / (points + 1) as f64).collect();
    let proposed = tau_d
        .iter()
        .map(|t| rate_at_downlink(&problem, *t))
        .collect::<Result<_, _>>()?;
    let era = tau_d
        .iter()
        .map(|t| era_objective(*t, &channel, &cfg))
        .collect::<Result<_, _>>()?;
    Ok(Curves {
        tau_d,
        proposed,
        era,
    })
}

fn js<T: Serialize>(value: Result<T, WpcnError>) -> Result<String, JsError> {
    let value = value.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, JsError> {
    serde_json::from_str(text).map_err(|e| JsError::new(&format!("bad input: {e}")))
}

#[wasm_bindgen]
pub fn codec(fractions_json: &str, alpha: f64, gains_json: &str) -> Result<String, JsError> {
    let fractions: Vec<f64> = parse(fractions_json)?;
    let gains: Vec<f64> = parse(gains_json)?;
    js(codec_view(&fractions, alpha, &gains))
}

#[wasm_bindgen(js_name = solveDemo)]
pub fn solve_demo(config_json: &str) -> Result<String, JsError> {
    js(solve_view(&parse(config_json)?))
}

#[wasm_bindgen(js_name = rateCurves)]
pub fn rate_curves_js(config_json: &str, points: usize) -> Result<String, JsError> {
    js(rate_curves(&parse(config_json)?, points))
}

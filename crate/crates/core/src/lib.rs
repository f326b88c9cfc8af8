//! Uplink time scheduling by downlink power level modulation in wireless
//! powered communication networks.
//!
//! An access point charges K receiver-less users with a downlink energy signal
//! split into K subslots. The relative power of the subslots tells every user
//! its share of the uplink TDMA period. This crate models the frame, the
//! level codec, the sum-rate maximization that chooses the levels, an
//! equal-split baseline, and the Monte Carlo sweeps comparing the two.

pub mod baseline;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod optimizer;
pub mod physics;
pub mod plm;

pub use channel::{path_loss_gain, sample_channel, ChannelRealization, Topology};
pub use error::{Result, WpcnError};
pub use optimizer::{
    oracle_grid_search, reduced_objective, solve, ProblemInstance, SolveOptions, SolveResult,
    SolveStatus, Variant,
};
pub use physics::{Schedule, SystemConfig};
pub use plm::{decode_schedule, encode_schedule, MeasuredEnergies, ScheduleFractions};

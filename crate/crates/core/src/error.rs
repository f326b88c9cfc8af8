use thiserror::Error;

/// Errors produced by the model, codec, solvers and experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum WpcnError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration field violates one of its constraints.
    #[error("invalid configuration: `{field}` {constraint}")]
    InvalidConfig { field: String, constraint: String },

    /// The requested uplink split needs a downlink level above the peak power.
    #[error(
        "unrepresentable schedule: user {user} needs downlink level {level} W above peak {peak} W"
    )]
    UnrepresentableSchedule { user: usize, level: f64, peak: f64 },

    #[error("no energy received: measured energies sum to zero")]
    NoEnergy,

    #[error("oracle limited to K ≤ 3 (got K = {users})")]
    OracleTooLarge { users: usize },

    #[error("unknown preset `{name}`; known presets: {known}")]
    UnknownPreset { name: String, known: String },

    /// A per-trial solve failed inside a sweep. Carries what is needed to reproduce it.
    #[error("solver failure at {point} (trial {trial}, base seed {base_seed}): {reason}")]
    SolverFailure {
        point: String,
        trial: u64,
        base_seed: u64,
        reason: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl WpcnError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        WpcnError::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        WpcnError::InvalidConfig {
            field: field.into(),
            constraint: constraint.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, WpcnError>;

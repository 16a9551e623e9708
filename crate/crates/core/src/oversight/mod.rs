//! Ecosystem oversight: production sampling, randomized device assignment,
//! the entity registry, inspections and power-log audits.

mod assignment;
mod inspection;
mod power;
mod registry;
mod sampling;

use thiserror::Error;

use crate::signature::Identity;

pub use assignment::{all_captured_probability, assign_randomly};
pub use inspection::{
    InspectionEvent, InspectionOutcome, InspectionPlan, schedule_inspections,
    write_inspection_csv,
};
pub use power::{GapExplanation, PowerGap, PowerInterval, PowerLog, audit_power_log};
pub use registry::{EntityKind, EntityRecord, EntityStatus, Registry};
pub use sampling::{
    BatchScenario, detection_probability, sample_population, simulate_batch_smuggling,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OversightError {
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("inspection plan has no rate for {0:?}")]
    MissingRateForKind(EntityKind),
    #[error("malformed power log: {0}")]
    MalformedPowerLog(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("unknown entity {0}")]
    UnknownEntity(Identity),
    #[error("entity {0} registered twice")]
    DuplicateEntity(Identity),
    #[error("entity {id}: {from:?} -> {to:?} not allowed")]
    IllegalTransition {
        id: Identity,
        from: EntityStatus,
        to: EntityStatus,
    },
    #[error("registry import failed: {0}")]
    Import(String),
}

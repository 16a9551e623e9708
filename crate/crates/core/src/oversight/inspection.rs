//! Random on-site inspection scheduling and the inspection event log.

use std::collections::BTreeMap;
use std::io;
use std::ops::Range;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::oversight::OversightError;
use crate::oversight::registry::{EntityKind, EntityStatus, Registry};
use crate::rng::SimRng;
use crate::signature::Identity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct InspectionPlan {
    /// Production-line sampling rate.
    #[serde(default)]
    pub sampling_rate: f64,
    /// Per-period inspection probability for each entity kind.
    pub rates: BTreeMap<EntityKind, f64>,
}

impl InspectionPlan {
    pub fn uniform(rate: f64) -> Self {
        InspectionPlan {
            sampling_rate: 0.0,
            rates: EntityKind::ALL.iter().map(|k| (*k, rate)).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), OversightError> {
        for p in std::iter::once(&self.sampling_rate).chain(self.rates.values()) {
            if !(0.0..=1.0).contains(p) {
                return Err(OversightError::ProbabilityOutOfRange(*p));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InspectionOutcome {
    Scheduled,
    Responded,
    Missing,
}

impl InspectionOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            InspectionOutcome::Scheduled => "scheduled",
            InspectionOutcome::Responded => "responded",
            InspectionOutcome::Missing => "missing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InspectionEvent {
    pub tick: u64,
    pub entity_id: Identity,
    pub kind: EntityKind,
    pub goal: String,
    pub outcome: InspectionOutcome,
}

/// Selects each non-destroyed entity independently with its kind's rate and
/// gives it a uniform tick in `period`. Events come back ordered by
/// `(tick, entity_id)`.
pub fn schedule_inspections(
    rng: &mut SimRng,
    registry: &Registry,
    plan: &InspectionPlan,
    period: Range<u64>,
) -> Result<Vec<InspectionEvent>, OversightError> {
    plan.validate()?;
    if period.is_empty() {
        return Err(OversightError::InvalidScenario(format!(
            "empty inspection period {period:?}"
        )));
    }
    let span = period.end - period.start;
    let mut events = Vec::new();
    for rec in registry.records() {
        let rate = *plan
            .rates
            .get(&rec.kind)
            .ok_or(OversightError::MissingRateForKind(rec.kind))?;
        if rec.status == EntityStatus::Destroyed {
            continue;
        }
        if rng.bernoulli(rate) {
            events.push(InspectionEvent {
                tick: period.start + rng.below(span),
                entity_id: rec.entity_id.clone(),
                kind: rec.kind,
                goal: rec.kind.inspection_goal().to_string(),
                outcome: InspectionOutcome::Scheduled,
            });
        }
    }
    events.sort_by(|a, b| (a.tick, &a.entity_id).cmp(&(b.tick, &b.entity_id)));
    Ok(events)
}

/// Writes events as CSV with header `tick,entity_id,kind,goal,outcome`.
pub fn write_inspection_csv<W: io::Write>(
    events: &[InspectionEvent],
    out: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tick", "entity_id", "kind", "goal", "outcome"])?;
    for e in events {
        w.write_record([
            e.tick.to_string().as_str(),
            e.entity_id.as_str(),
            &format!("{:?}", e.kind),
            &e.goal,
            e.outcome.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

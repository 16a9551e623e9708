//! Scenario configuration: JSON parsing and validation.

use std::collections::BTreeSet;
use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::oversight::{BatchScenario, EntityRecord, InspectionPlan, PowerLog, Registry};
use crate::protocol::{ApproverPolicy, LocationConfig, Ruleset, Tick, WorkloadDescriptor};
use crate::signature::Identity;
use crate::stability::SweepGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ScenarioConfig {
    /// Master seed. Every random draw in a run derives from it.
    pub seed: u64,
    pub policy: ApproverPolicy,
    pub devices: Vec<DeviceSpec>,
    /// Inspectable entities. Devices missing from it are registered as
    /// guarantee devices with empty owner and location.
    #[serde(default)]
    pub registry: Vec<EntityRecord>,
    #[serde(default)]
    pub inspection_plan: Option<InspectionPlan>,
    /// Applied in order. Ticks must not decrease.
    pub events: Vec<Event>,
    #[serde(default)]
    pub stability: Option<SweepGrid>,
    #[serde(default)]
    pub oversight: Option<OversightRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DeviceSpec {
    pub device_id: Identity,
    #[serde(default)]
    pub clock: Tick,
    #[serde(default)]
    pub location: Option<LocationConfig>,
    #[serde(default)]
    pub power_log: PowerLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct OversightRun {
    pub scenario: BatchScenario,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Event {
    pub tick: Tick,
    #[serde(flatten)]
    pub action: EventAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventAction {
    /// Creates an unsigned update named `id`.
    ProposeUpdate {
        id: String,
        serial: u64,
        version: u64,
        ruleset: Ruleset,
        lifetime: u64,
        /// Defaults to the event tick.
        #[serde(default)]
        issued_at: Option<Tick>,
    },
    /// Creates an unsigned extension named `id`.
    ProposeExtension {
        id: String,
        serial: u64,
        target_serial: u64,
        new_expiry: Tick,
        #[serde(default)]
        issued_at: Option<Tick>,
    },
    /// `signer` signs through its transcript-keeping signer device.
    Sign { artifact: String, signer: Identity },
    Install { device: Identity, artifact: String },
    Extend { device: Identity, artifact: String },
    /// Advances one device's clock, or every device's when `device` is absent.
    AdvanceClock {
        #[serde(default)]
        device: Option<Identity>,
        dt: Tick,
    },
    Workload {
        device: Identity,
        workload: WorkloadDescriptor,
    },
    /// Schedules inspections over `[tick, tick + period)`, audits power logs
    /// and flags registered devices listed in `silent` as missing. With
    /// `refer_to`, the missing devices are denied license renewal by that
    /// authority.
    InspectionRound {
        #[serde(default)]
        silent: Vec<Identity>,
        #[serde(default = "one_tick")]
        period: Tick,
        #[serde(default)]
        max_unexplained: Option<Tick>,
        #[serde(default)]
        refer_to: Option<Identity>,
    },
    LicenseAction {
        action: LicenseOp,
        authority: Identity,
        devices: Vec<Identity>,
        /// Required for `issue`.
        #[serde(default)]
        duration: Option<Tick>,
    },
    LocationCheck {
        device: Identity,
        responses: Vec<LandmarkReading>,
    },
    TamperInject {
        action: TamperOp,
        /// `bypass_sign`: artifact to sign outside the transcript.
        #[serde(default)]
        artifact: Option<String>,
        #[serde(default)]
        signer: Option<Identity>,
        /// `mark_tampered`: registry entity to mark.
        #[serde(default)]
        entity: Option<Identity>,
    },
}

fn one_tick() -> Tick {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum LicenseOp {
    Issue,
    DenyRenewal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum TamperOp {
    /// A compromised approver key signs without its transcript.
    BypassSign,
    MarkTampered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct LandmarkReading {
    pub landmark: Identity,
    pub distance: f64,
}

pub const EVENT_TAGS: [&str; 11] = [
    "propose_update",
    "propose_extension",
    "sign",
    "install",
    "extend",
    "advance_clock",
    "workload",
    "inspection_round",
    "license_action",
    "location_check",
    "tamper_inject",
];

impl EventAction {
    pub fn tag(&self) -> &'static str {
        match self {
            EventAction::ProposeUpdate { .. } => "propose_update",
            EventAction::ProposeExtension { .. } => "propose_extension",
            EventAction::Sign { .. } => "sign",
            EventAction::Install { .. } => "install",
            EventAction::Extend { .. } => "extend",
            EventAction::AdvanceClock { .. } => "advance_clock",
            EventAction::Workload { .. } => "workload",
            EventAction::InspectionRound { .. } => "inspection_round",
            EventAction::LicenseAction { .. } => "license_action",
            EventAction::LocationCheck { .. } => "location_check",
            EventAction::TamperInject { .. } => "tamper_inject",
        }
    }
}

/// One problem found in a config, located by JSON pointer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() { "/" } else { &self.path };
        write!(f, "{path}: {}", self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    SchemaViolation(Vec<Violation>),
    #[error("/events/{index}/type: unknown event type {tag:?}")]
    UnknownEventTag { index: usize, tag: String },
}

fn violation(path: impl Into<String>, message: impl Into<String>) -> Violation {
    Violation {
        path: path.into(),
        message: message.into(),
    }
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => {
                out.push('/');
                out.push_str(&key.replace('~', "~0").replace('/', "~1"));
            }
            Segment::Enum { .. } | Segment::Unknown => {}
        }
    }
    out
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| ConfigError::SchemaViolation(vec![violation("", e.to_string())]))?;

    if let Some(events) = value.get("events").and_then(Value::as_array) {
        for (index, ev) in events.iter().enumerate() {
            if let Some(tag) = ev.get("type").and_then(Value::as_str) {
                if !EVENT_TAGS.contains(&tag) {
                    return Err(ConfigError::UnknownEventTag {
                        index,
                        tag: tag.to_string(),
                    });
                }
            }
        }
    }

    let cfg: ScenarioConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        ConfigError::SchemaViolation(vec![violation(pointer(e.path()), e.inner().to_string())])
    })?;

    let issues = cfg.check();
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::SchemaViolation(issues))
    }
}

impl ScenarioConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Semantic checks the schema cannot express.
    pub fn check(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if let Err(e) = self.policy.validate() {
            out.push(violation("/policy", e.to_string()));
        }

        let mut devices = BTreeSet::new();
        for (i, d) in self.devices.iter().enumerate() {
            if !devices.insert(&d.device_id) {
                out.push(violation(
                    format!("/devices/{i}/device_id"),
                    format!("device {} listed twice", d.device_id),
                ));
            }
        }
        if let Err(e) = Registry::new(self.registry.clone()) {
            out.push(violation("/registry", e.to_string()));
        }
        if let Some(plan) = &self.inspection_plan {
            if let Err(e) = plan.validate() {
                out.push(violation("/inspection_plan", e.to_string()));
            }
        }
        if let Some(grid) = &self.stability {
            if let Err(e) = crate::stability::sweep(grid) {
                out.push(violation("/stability", e.to_string()));
            }
        }
        if let Some(o) = &self.oversight {
            if let Err(e) = o.scenario.validate() {
                out.push(violation("/oversight/scenario", e.to_string()));
            }
            if o.trials == 0 {
                out.push(violation("/oversight/trials", "need at least one trial"));
            }
        }

        let mut last_tick = 0;
        for (i, ev) in self.events.iter().enumerate() {
            let at = |field: &str| format!("/events/{i}/{field}");
            if ev.tick < last_tick {
                out.push(violation(
                    at("tick"),
                    format!("event {i} at tick {} precedes tick {last_tick}", ev.tick),
                ));
            }
            last_tick = last_tick.max(ev.tick);

            let mut need_device = |id: &Identity, field: &str| {
                if !devices.contains(id) {
                    out.push(violation(at(field), format!("unknown device {id}")));
                }
            };
            match &ev.action {
                EventAction::Install { device, .. }
                | EventAction::Extend { device, .. }
                | EventAction::Workload { device, .. }
                | EventAction::LocationCheck { device, .. } => need_device(device, "device"),
                EventAction::AdvanceClock { device: Some(d), .. } => need_device(d, "device"),
                EventAction::LicenseAction {
                    action, devices: ids, duration, ..
                } => {
                    for id in ids {
                        need_device(id, "devices");
                    }
                    if *action == LicenseOp::Issue && duration.is_none() {
                        out.push(violation(at("duration"), "issue needs a duration"));
                    }
                }
                EventAction::InspectionRound { period, .. } if *period == 0 => {
                    out.push(violation(at("period"), "period must be positive"));
                }
                EventAction::TamperInject {
                    action,
                    artifact,
                    signer,
                    entity,
                } => match action {
                    TamperOp::BypassSign if artifact.is_none() || signer.is_none() => {
                        out.push(violation(at("action"), "bypass_sign needs artifact and signer"));
                    }
                    TamperOp::MarkTampered if entity.is_none() => {
                        out.push(violation(at("action"), "mark_tampered needs entity"));
                    }
                    _ => {}
                },
                _ => {}
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "seed": 1,
        "policy": {"approvers": ["A"], "update_rule": {"kind": "all_approvers"},
                   "extension_fraction": {"num": 1, "den": 2}},
        "devices": [{"device_id": "d1"}],
        "events": [
            {"tick": 0, "type": "propose_update", "id": "u1", "serial": 1, "version": 1,
             "ruleset": {"ruleset_id": "r1", "grants": []}, "lifetime": 10},
            {"tick": 1, "type": "advance_clock", "dt": 5}
        ]
    }"#;

    #[test]
    fn minimal_parses_and_round_trips() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.events.len(), 2);
        assert_eq!(parse_config(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn out_of_order_tick_names_event() {
        let text = MINIMAL.replace(r#""tick": 1"#, r#""tick": 0"#).replace(r#""tick": 0, "type": "propose"#, r#""tick": 3, "type": "propose"#);
        match parse_config(&text) {
            Err(ConfigError::SchemaViolation(v)) => assert_eq!(v[0].path, "/events/1/tick"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_tag() {
        let text = MINIMAL.replace("advance_clock", "time_travel");
        assert_eq!(
            parse_config(&text),
            Err(ConfigError::UnknownEventTag {
                index: 1,
                tag: "time_travel".into()
            })
        );
    }

    #[test]
    fn type_error_has_pointer() {
        let text = MINIMAL.replace(r#""seed": 1"#, r#""seed": "x""#);
        match parse_config(&text) {
            Err(ConfigError::SchemaViolation(v)) => assert_eq!(v[0].path, "/seed"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_device_reference() {
        let text = MINIMAL.replace(r#""dt": 5"#, r#""dt": 5, "device": "ghost""#);
        match parse_config(&text) {
            Err(ConfigError::SchemaViolation(v)) => assert_eq!(v[0].path, "/events/1/device"),
            other => panic!("{other:?}"),
        }
    }
}

//! Seeded end-to-end scenarios: JSON configuration, execution and reports.

mod config;
mod report;
mod run;

pub use config::{
    ConfigError, DeviceSpec, EVENT_TAGS, Event, EventAction, LandmarkReading, LicenseOp,
    OversightRun, ScenarioConfig, TamperOp, Violation, parse_config,
};
pub use report::{
    ConflictRecord, DeviceSummary, EmitError, EventRecord, EventStatus, Format, OversightSummary,
    PowerFlag, RunReport, WorkloadTally, emit_report, render_report,
};
pub use run::run_scenario;

/// JSON Schema for [`ScenarioConfig`], as shipped in `schema/scenario.schema.json`.
pub fn config_schema() -> String {
    let schema = schemars::schema_for!(ScenarioConfig);
    let mut s = serde_json::to_string_pretty(&schema).expect("schema serializes");
    s.push('\n');
    s
}

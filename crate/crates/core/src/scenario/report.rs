//! Run reports and their CSV/JSON renderings.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::oversight::{InspectionEvent, write_inspection_csv};
use crate::protocol::{ConflictKind, DeviceMode, Tick};
use crate::signature::{Identity, digest};
use crate::stability::{SweepRow, write_sweep_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventStatus {
    Ok,
    Rejected,
    Allow,
    Deny,
}

impl EventStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            EventStatus::Ok => "ok",
            EventStatus::Rejected => "rejected",
            EventStatus::Allow => "allow",
            EventStatus::Deny => "deny",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub index: usize,
    pub tick: Tick,
    #[serde(rename = "type")]
    pub kind: String,
    pub status: EventStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSummary {
    pub device_id: Identity,
    pub mode: DeviceMode,
    pub clock: Tick,
    /// 0 when no firmware was ever installed.
    pub serial: u64,
    pub version: u64,
    pub ruleset_id: Option<String>,
    pub expiry: Option<Tick>,
    pub rollback_floor: u64,
    pub license_expiry: Option<Tick>,
    pub attestation_valid: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadTally {
    pub device_id: Identity,
    pub verdict: String,
    /// Empty for allowed workloads.
    pub reason: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictRecord {
    pub first: String,
    pub second: String,
    pub signer: Identity,
    pub kind: ConflictKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowerFlag {
    pub tick: Tick,
    pub device_id: Identity,
    pub start: Tick,
    pub end: Tick,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OversightSummary {
    pub population: u64,
    pub compromised: u64,
    pub sampling_rate: f64,
    pub trials: u64,
    pub analytic: f64,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub devices: Vec<DeviceSummary>,
    /// One record per config event, in config order.
    pub events: Vec<EventRecord>,
    pub workloads: Vec<WorkloadTally>,
    pub conflicts: Vec<ConflictRecord>,
    pub inspections: Vec<InspectionEvent>,
    pub power_flags: Vec<PowerFlag>,
    pub stability: Vec<SweepRow>,
    pub oversight: Option<OversightSummary>,
    /// SHA-256 of the canonical JSON of this report with this field empty.
    pub checksum: String,
}

impl RunReport {
    /// JSON with object keys sorted, pretty-printed, newline-terminated.
    pub fn canonical_json(&self) -> String {
        let value: Value = serde_json::to_value(self).expect("report serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn compute_checksum(&self) -> String {
        let mut blank = self.clone();
        blank.checksum.clear();
        hex::encode(digest(blank.canonical_json().as_bytes()))
    }

    pub fn seal(mut self) -> Self {
        self.checksum = self.compute_checksum();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Error)]
#[error("{}: {source}", path.display())]
pub struct EmitError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

fn csv_bytes(
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

/// File name and contents of every report file, sorted by name.
///
/// CSV files and their columns:
///
/// - `conflicts.csv`: first,second,signer,kind
/// - `devices.csv`: device_id,mode,clock,serial,version,ruleset_id,expiry,rollback_floor,license_expiry,attestation_valid
/// - `events.csv`: index,tick,type,status,detail
/// - `inspections.csv`: tick,entity_id,kind,goal,outcome
/// - `oversight.csv`: population,compromised,sampling_rate,trials,analytic,estimate
/// - `power_flags.csv`: tick,device_id,start,end
/// - `stability.csv`: u_w,p_doom,p_w_given_d,defector_payoff,stable
/// - `workloads.csv`: device_id,verdict,reason,count
///
/// Every file is written even when it has no rows. JSON goes to
/// `report.json`.
pub fn render_report(report: &RunReport, formats: &[Format]) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    if formats.contains(&Format::Json) {
        files.push(("report.json".to_string(), report.canonical_json().into_bytes()));
    }
    if formats.contains(&Format::Csv) {
        files.push((
            "events.csv".into(),
            csv_bytes(
                &["index", "tick", "type", "status", "detail"],
                report.events.iter().map(|e| {
                    vec![
                        e.index.to_string(),
                        e.tick.to_string(),
                        e.kind.clone(),
                        e.status.as_str().into(),
                        e.detail.clone(),
                    ]
                }),
            ),
        ));
        files.push((
            "devices.csv".into(),
            csv_bytes(
                &[
                    "device_id",
                    "mode",
                    "clock",
                    "serial",
                    "version",
                    "ruleset_id",
                    "expiry",
                    "rollback_floor",
                    "license_expiry",
                    "attestation_valid",
                ],
                report.devices.iter().map(|d| {
                    vec![
                        d.device_id.to_string(),
                        serde_json::to_value(d.mode)
                            .ok()
                            .and_then(|v| v.as_str().map(str::to_string))
                            .unwrap_or_default(),
                        d.clock.to_string(),
                        d.serial.to_string(),
                        d.version.to_string(),
                        opt(&d.ruleset_id),
                        opt(&d.expiry),
                        d.rollback_floor.to_string(),
                        opt(&d.license_expiry),
                        d.attestation_valid.to_string(),
                    ]
                }),
            ),
        ));
        files.push((
            "workloads.csv".into(),
            csv_bytes(
                &["device_id", "verdict", "reason", "count"],
                report.workloads.iter().map(|w| {
                    vec![
                        w.device_id.to_string(),
                        w.verdict.clone(),
                        w.reason.clone(),
                        w.count.to_string(),
                    ]
                }),
            ),
        ));
        files.push((
            "conflicts.csv".into(),
            csv_bytes(
                &["first", "second", "signer", "kind"],
                report.conflicts.iter().map(|c| {
                    vec![
                        c.first.clone(),
                        c.second.clone(),
                        c.signer.to_string(),
                        format!("{:?}", c.kind),
                    ]
                }),
            ),
        ));
        let mut insp = Vec::new();
        write_inspection_csv(&report.inspections, &mut insp).expect("in-memory write");
        files.push(("inspections.csv".into(), insp));
        files.push((
            "power_flags.csv".into(),
            csv_bytes(
                &["tick", "device_id", "start", "end"],
                report.power_flags.iter().map(|p| {
                    vec![
                        p.tick.to_string(),
                        p.device_id.to_string(),
                        p.start.to_string(),
                        p.end.to_string(),
                    ]
                }),
            ),
        ));
        let mut stab = Vec::new();
        write_sweep_csv(&report.stability, &mut stab).expect("in-memory write");
        files.push(("stability.csv".into(), stab));
        files.push((
            "oversight.csv".into(),
            csv_bytes(
                &["population", "compromised", "sampling_rate", "trials", "analytic", "estimate"],
                report.oversight.iter().map(|o| {
                    vec![
                        o.population.to_string(),
                        o.compromised.to_string(),
                        o.sampling_rate.to_string(),
                        o.trials.to_string(),
                        o.analytic.to_string(),
                        o.estimate.to_string(),
                    ]
                }),
            ),
        ));
    }
    files.sort_by(|a, b| a.0.cmp(&b.0));
    files
}

/// Writes the rendered report into `dir`, creating it if needed. Returns
/// the written paths in name order.
pub fn emit_report(report: &RunReport, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>, EmitError> {
    fs::create_dir_all(dir).map_err(|source| EmitError {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for (name, bytes) in render_report(report, formats) {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|source| EmitError {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

//! Deterministic scenario execution.

use std::collections::{BTreeMap, BTreeSet};

use crate::oversight::{
    EntityKind, EntityRecord, EntityStatus, InspectionOutcome, Registry,
    audit_power_log, detection_probability, schedule_inspections, simulate_batch_smuggling,
};
use crate::protocol::{
    DeviceKeyRegistry, DeviceState, LandmarkResponse, LicenseAuthority, SignedArtifact,
    SignerDevice, Verdict, detect_equivocation, verify_attestation,
};
use crate::protocol::{ExtensionCertificate, FirmwareUpdate};
use crate::rng::SimRng;
use crate::scenario::config::{EventAction, LicenseOp, ScenarioConfig, TamperOp};
use crate::scenario::report::{
    ConflictRecord, DeviceSummary, EventRecord, EventStatus, OversightSummary, PowerFlag,
    RunReport, WorkloadTally,
};
use crate::signature::{Identity, SigningKey};
use crate::stability::sweep;

/// Stream index of the inspection generator under the master seed.
const INSPECTION_STREAM: u64 = 0;

type Outcome = (EventStatus, String);

fn ok(detail: impl Into<String>) -> Outcome {
    (EventStatus::Ok, detail.into())
}

fn rejected(detail: impl Into<String>) -> Outcome {
    (EventStatus::Rejected, detail.into())
}

struct Run<'a> {
    cfg: &'a ScenarioConfig,
    devices: BTreeMap<Identity, DeviceState>,
    keys: DeviceKeyRegistry,
    artifacts: Vec<(String, SignedArtifact)>,
    signers: BTreeMap<Identity, SignerDevice>,
    authorities: BTreeMap<Identity, LicenseAuthority>,
    registry: Registry,
    rng: SimRng,
    tally: BTreeMap<(Identity, String, String), u64>,
    report: RunReport,
}

/// Applies every event in order. Failures inside the scenario become event
/// outcomes; nothing here aborts a run. The config must have passed
/// [`parse_config`](crate::scenario::parse_config) or [`ScenarioConfig::check`].
pub fn run_scenario(cfg: &ScenarioConfig) -> RunReport {
    let mut run = Run::new(cfg);
    for (index, ev) in cfg.events.iter().enumerate() {
        let (status, detail) = run.apply(ev.tick, &ev.action);
        run.report.events.push(EventRecord {
            index,
            tick: ev.tick,
            kind: ev.action.tag().to_string(),
            status,
            detail,
        });
    }
    run.finish()
}

impl<'a> Run<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        let mut devices = BTreeMap::new();
        let mut keys = DeviceKeyRegistry::new();
        for spec in &cfg.devices {
            let mut d = DeviceState::provision(spec.device_id.clone(), &cfg.policy, spec.clock);
            d.location = spec.location.clone();
            d.power_log = spec.power_log.clone();
            keys.register(&d);
            devices.insert(spec.device_id.clone(), d);
        }

        let mut records = cfg.registry.clone();
        for spec in &cfg.devices {
            if !records.iter().any(|r| r.entity_id == spec.device_id) {
                records.push(EntityRecord::new(
                    spec.device_id.clone(),
                    EntityKind::FlexHegDevice,
                    "",
                    "",
                ));
            }
        }
        let registry = Registry::new(records).expect("config checked for duplicates");

        Run {
            cfg,
            devices,
            keys,
            artifacts: Vec::new(),
            signers: BTreeMap::new(),
            authorities: BTreeMap::new(),
            registry,
            rng: SimRng::stream(cfg.seed, INSPECTION_STREAM),
            tally: BTreeMap::new(),
            report: RunReport {
                seed: cfg.seed,
                devices: Vec::new(),
                events: Vec::new(),
                workloads: Vec::new(),
                conflicts: Vec::new(),
                inspections: Vec::new(),
                power_flags: Vec::new(),
                stability: Vec::new(),
                oversight: None,
                checksum: String::new(),
            },
        }
    }

    fn artifact_mut(&mut self, id: &str) -> Option<&mut SignedArtifact> {
        self.artifacts.iter_mut().find(|(k, _)| k == id).map(|(_, a)| a)
    }

    fn artifact(&self, id: &str) -> Option<&SignedArtifact> {
        self.artifacts.iter().find(|(k, _)| k == id).map(|(_, a)| a)
    }

    fn propose(&mut self, id: &str, artifact: SignedArtifact) -> Outcome {
        if self.artifact(id).is_some() {
            return rejected(format!("artifact {id} already proposed"));
        }
        let w = artifact.window();
        let detail = format!(
            "{id}: serial {} window [{}, {})",
            artifact.serial(),
            w.start,
            w.end
        );
        self.artifacts.push((id.to_string(), artifact));
        ok(detail)
    }

    fn apply(&mut self, tick: u64, action: &EventAction) -> Outcome {
        let policy = &self.cfg.policy;
        match action {
            EventAction::ProposeUpdate {
                id,
                serial,
                version,
                ruleset,
                lifetime,
                issued_at,
            } => {
                let u = FirmwareUpdate::new(
                    *serial,
                    *version,
                    ruleset.clone(),
                    *lifetime,
                    issued_at.unwrap_or(tick),
                );
                self.propose(id, u.into())
            }
            EventAction::ProposeExtension {
                id,
                serial,
                target_serial,
                new_expiry,
                issued_at,
            } => {
                let e = ExtensionCertificate::new(
                    *serial,
                    *target_serial,
                    issued_at.unwrap_or(tick),
                    *new_expiry,
                );
                self.propose(id, e.into())
            }
            EventAction::Sign { artifact, signer } => {
                let Some(a) = self.artifact(artifact).cloned() else {
                    return rejected(format!("unknown artifact {artifact}"));
                };
                let device = self
                    .signers
                    .entry(signer.clone())
                    .or_insert_with(|| SignerDevice::new(SigningKey::new(signer.clone())));
                match device.sign_artifact(&a) {
                    Ok((sig, next)) => {
                        *device = next;
                        self.artifact_mut(artifact)
                            .expect("looked up above")
                            .signatures_mut()
                            .insert(signer.clone(), sig);
                        ok(format!("{signer} signed {artifact}"))
                    }
                    Err(e) => rejected(format!("{signer} refused {artifact}: {e}")),
                }
            }
            EventAction::Install { device, artifact } => {
                let Some(SignedArtifact::Update(u)) = self.artifact(artifact).cloned() else {
                    return rejected(format!("{artifact} is not a proposed update"));
                };
                let d = &self.devices[device];
                match d.install_update(&u, policy) {
                    Ok(next) => {
                        let detail = format!(
                            "{device} runs serial {} until {}",
                            u.serial,
                            next.expiry().unwrap_or_default()
                        );
                        self.devices.insert(device.clone(), next);
                        ok(detail)
                    }
                    Err(e) => rejected(format!("{device}: {e}")),
                }
            }
            EventAction::Extend { device, artifact } => {
                let Some(SignedArtifact::Extension(x)) = self.artifact(artifact).cloned() else {
                    return rejected(format!("{artifact} is not a proposed extension"));
                };
                let d = &self.devices[device];
                match d.extend_lifetime(&x, policy) {
                    Ok(next) => {
                        self.devices.insert(device.clone(), next);
                        ok(format!("{device} extended to {}", x.new_expiry))
                    }
                    Err(e) => rejected(format!("{device}: {e}")),
                }
            }
            EventAction::AdvanceClock { device, dt } => {
                let ids: Vec<Identity> = match device {
                    Some(d) => vec![d.clone()],
                    None => self.devices.keys().cloned().collect(),
                };
                let mut notes = Vec::new();
                for id in ids {
                    let next = self.devices[&id].advance_clock(*dt);
                    notes.push(format!("{id}@{} {:?}", next.clock, next.mode));
                    self.devices.insert(id, next);
                }
                ok(notes.join("; "))
            }
            EventAction::Workload { device, workload } => {
                let verdict = self.devices[device].evaluate_workload(workload);
                let (status, reason) = match verdict {
                    Verdict::Allow => (EventStatus::Allow, String::new()),
                    Verdict::Deny(r) => (EventStatus::Deny, format!("{r:?}")),
                };
                *self
                    .tally
                    .entry((device.clone(), status.as_str().to_string(), reason.clone()))
                    .or_default() += 1;
                (status, reason)
            }
            EventAction::InspectionRound {
                silent,
                period,
                max_unexplained,
                refer_to,
            } => self.inspection_round(tick, silent, *period, *max_unexplained, refer_to.as_ref()),
            EventAction::LicenseAction {
                action,
                authority,
                devices,
                duration,
            } => {
                let auth = self
                    .authorities
                    .entry(authority.clone())
                    .or_insert_with(|| LicenseAuthority::new(SigningKey::new(authority.clone())));
                match action {
                    LicenseOp::DenyRenewal => match auth.deny_renewal(policy, devices, tick) {
                        Ok(rec) => ok(format!("denial record {}", rec.record_id())),
                        Err(e) => rejected(e.to_string()),
                    },
                    LicenseOp::Issue => {
                        let duration = duration.expect("config checked");
                        let mut notes = Vec::new();
                        let mut all_ok = true;
                        for id in devices {
                            let d = &self.devices[id];
                            let res = auth
                                .issue(policy, id, duration, d.clock)
                                .and_then(|lic| d.apply_license(&lic, policy));
                            match res {
                                Ok(next) => {
                                    notes.push(format!(
                                        "{id} licensed until {}",
                                        next.license.as_ref().map_or(0, |l| l.expiry)
                                    ));
                                    self.devices.insert(id.clone(), next);
                                }
                                Err(e) => {
                                    all_ok = false;
                                    notes.push(e.to_string());
                                }
                            }
                        }
                        let detail = notes.join("; ");
                        if all_ok { ok(detail) } else { rejected(detail) }
                    }
                }
            }
            EventAction::LocationCheck { device, responses } => {
                let d = &self.devices[device];
                let signed: Vec<LandmarkResponse> = responses
                    .iter()
                    .map(|r| {
                        LandmarkResponse::signed(
                            &SigningKey::new(r.landmark.clone()),
                            device.clone(),
                            d.clock,
                            r.distance,
                        )
                    })
                    .collect();
                let (passed, next) = d.verify_location(&signed);
                let detail = format!("{device} {:?}", next.mode);
                self.devices.insert(device.clone(), next);
                if passed { ok(detail) } else { rejected(detail) }
            }
            EventAction::TamperInject {
                action,
                artifact,
                signer,
                entity,
            } => match action {
                TamperOp::BypassSign => {
                    let (artifact, signer) = (
                        artifact.as_ref().expect("config checked"),
                        signer.as_ref().expect("config checked"),
                    );
                    match self.artifact_mut(artifact) {
                        Some(a) => {
                            a.sign_raw(&SigningKey::new(signer.clone()));
                            ok(format!("{signer} signed {artifact} outside its transcript"))
                        }
                        None => rejected(format!("unknown artifact {artifact}")),
                    }
                }
                TamperOp::MarkTampered => {
                    let entity = entity.as_ref().expect("config checked");
                    match self.registry.set_status(entity, EntityStatus::TamperSuspected) {
                        Ok(()) => ok(format!("{entity} marked tamper-suspected")),
                        Err(e) => rejected(e.to_string()),
                    }
                }
            },
        }
    }

    fn inspection_round(
        &mut self,
        tick: u64,
        silent: &[Identity],
        period: u64,
        max_unexplained: Option<u64>,
        refer_to: Option<&Identity>,
    ) -> Outcome {
        let silent: BTreeSet<&Identity> = silent.iter().collect();
        let mut notes = Vec::new();

        if let Some(plan) = &self.cfg.inspection_plan {
            match schedule_inspections(&mut self.rng, &self.registry, plan, tick..tick + period) {
                Ok(events) => {
                    notes.push(format!("{} inspections", events.len()));
                    self.report.inspections.extend(events.into_iter().map(|mut e| {
                        e.outcome = if silent.contains(&e.entity_id) {
                            InspectionOutcome::Missing
                        } else {
                            InspectionOutcome::Responded
                        };
                        e
                    }));
                }
                Err(e) => return rejected(e.to_string()),
            }
        }

        if let Some(max) = max_unexplained {
            let mut flagged = 0;
            for (id, d) in &self.devices {
                for g in audit_power_log(&d.power_log, tick, max) {
                    flagged += 1;
                    self.report.power_flags.push(PowerFlag {
                        tick,
                        device_id: id.clone(),
                        start: g.start,
                        end: g.end,
                    });
                }
            }
            notes.push(format!("{flagged} unexplained power gaps"));
        }

        let responses: BTreeSet<Identity> = self
            .registry
            .records()
            .iter()
            .filter(|r| !silent.contains(&r.entity_id))
            .map(|r| r.entity_id.clone())
            .collect();
        let missing = self.registry.flag_missing(&responses);
        let names: Vec<&str> = missing.iter().map(Identity::as_str).collect();
        notes.push(format!("missing [{}]", names.join(",")));

        if let (Some(authority), false) = (refer_to, missing.is_empty()) {
            let auth = self
                .authorities
                .entry(authority.clone())
                .or_insert_with(|| LicenseAuthority::new(SigningKey::new(authority.clone())));
            match auth.deny_renewal(&self.cfg.policy, &missing, tick) {
                Ok(rec) => notes.push(format!("denial record {}", rec.record_id())),
                Err(e) => return rejected(format!("{}; {e}", notes.join("; "))),
            }
        }
        ok(notes.join("; "))
    }

    fn finish(mut self) -> RunReport {
        let list: Vec<SignedArtifact> = self.artifacts.iter().map(|(_, a)| a.clone()).collect();
        self.report.conflicts = detect_equivocation(&list)
            .into_iter()
            .map(|c| ConflictRecord {
                first: self.artifacts[c.first].0.clone(),
                second: self.artifacts[c.second].0.clone(),
                signer: c.signer,
                kind: c.kind,
            })
            .collect();

        self.report.devices = self
            .devices
            .values()
            .map(|d| {
                let att = d.produce_attestation();
                DeviceSummary {
                    device_id: d.device_id.clone(),
                    mode: d.mode,
                    clock: d.clock,
                    serial: att.serial,
                    version: att.version,
                    ruleset_id: d.installed.as_ref().map(|f| f.ruleset.ruleset_id.clone()),
                    expiry: d.expiry(),
                    rollback_floor: d.rollback_floor,
                    license_expiry: d.license.as_ref().map(|l| l.expiry),
                    attestation_valid: verify_attestation(&att, &self.keys).unwrap_or(false),
                }
            })
            .collect();

        self.report.workloads = self
            .tally
            .into_iter()
            .map(|((device_id, verdict, reason), count)| WorkloadTally {
                device_id,
                verdict,
                reason,
                count,
            })
            .collect();

        if let Some(grid) = &self.cfg.stability {
            self.report.stability = sweep(grid).unwrap_or_default();
        }
        if let Some(o) = &self.cfg.oversight {
            let s = &o.scenario;
            self.report.oversight = Some(OversightSummary {
                population: s.population,
                compromised: s.compromised,
                sampling_rate: s.sampling_rate,
                trials: o.trials,
                analytic: detection_probability(s.sampling_rate, s.compromised).unwrap_or(f64::NAN),
                estimate: simulate_batch_smuggling(self.cfg.seed, s, o.trials).unwrap_or(f64::NAN),
            });
        }
        self.report.seal()
    }
}


//! Guarantee-processor state and its transitions.
//!
//! Mode transitions:
//!
//! | from             | event                          | to               |
//! |------------------|--------------------------------|------------------|
//! | Active           | clock reaches expiry, baseline | BaselineFallback |
//! | Active           | clock reaches expiry, none     | LockedDown       |
//! | Active           | failed enforced location check | LockedDown       |
//! | BaselineFallback | approved newer update          | Active           |
//! | Active           | approved newer update          | Active           |
//! | LockedDown       | anything                       | LockedDown       |
//!
//! A freshly provisioned device has no firmware and starts in
//! `BaselineFallback` until its first install.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::CanonicalEncode;
use crate::oversight::PowerLog;
use crate::protocol::artifact::{ExtensionCertificate, FirmwareUpdate, Tick, count_valid};
use crate::protocol::license::OperatingLicense;
use crate::protocol::location::LocationConfig;
use crate::protocol::policy::{ApproverPolicy, Approval, RejectReason, verify_update_approval};
use crate::protocol::ruleset::{
    CapabilityGrant, DenyReason, Ruleset, Verdict, WorkloadDescriptor, check_ratchet,
    evaluate_grants,
};
use crate::signature::{Identity, SigningKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum DeviceMode {
    Active,
    BaselineFallback,
    LockedDown,
}

impl DeviceMode {
    pub fn tag(self) -> u8 {
        match self {
            DeviceMode::Active => 0,
            DeviceMode::BaselineFallback => 1,
            DeviceMode::LockedDown => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstalledFirmware {
    pub serial: u64,
    pub version: u64,
    pub ruleset: Ruleset,
    pub expiry: Tick,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceState {
    pub device_id: Identity,
    pub installed: Option<InstalledFirmware>,
    /// Installed grants plus irrevocable grants carried from predecessors.
    pub effective_grants: Vec<CapabilityGrant>,
    pub clock: Tick,
    pub mode: DeviceMode,
    pub rollback_floor: u64,
    pub baseline: Option<Ruleset>,
    pub license: Option<OperatingLicense>,
    pub location: Option<LocationConfig>,
    pub power_log: PowerLog,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstallError {
    #[error("device is locked down")]
    DeviceLockedDown,
    #[error("update rejected by approval rule: {0:?}")]
    ApprovalInvalid(RejectReason),
    #[error("serial {serial} does not exceed rollback floor {floor}")]
    RollbackRejected { serial: u64, floor: u64 },
    #[error("new ruleset is less permissive than the installed one")]
    RatchetViolation,
    #[error("update has zero lifetime or malformed grants")]
    MalformedUpdate,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtendError {
    #[error("device is not active; extensions apply only before expiry")]
    AlreadyExpired,
    #[error("extension targets serial {target}, device runs {installed:?}")]
    WrongTarget { target: u64, installed: Option<u64> },
    #[error("new expiry {new_expiry} is not after current expiry {current}")]
    NonMonotoneExpiry { new_expiry: Tick, current: Tick },
    #[error("{valid} valid approver signatures, {required} required")]
    InsufficientSignatures { valid: usize, required: usize },
}

impl DeviceState {
    /// A device with no firmware, the policy's baseline burned in, at `clock`.
    pub fn provision(device_id: impl Into<Identity>, policy: &ApproverPolicy, clock: Tick) -> Self {
        DeviceState {
            device_id: device_id.into(),
            installed: None,
            effective_grants: Vec::new(),
            clock,
            mode: DeviceMode::BaselineFallback,
            rollback_floor: 0,
            baseline: policy.baseline.clone(),
            license: None,
            location: None,
            power_log: PowerLog::default(),
        }
    }

    pub fn with_location(mut self, cfg: LocationConfig) -> Self {
        self.location = Some(cfg);
        self
    }

    /// Key the guarantee processor signs attestations with.
    pub fn key(&self) -> SigningKey {
        SigningKey::new(self.device_id.clone())
    }

    pub fn expiry(&self) -> Option<Tick> {
        self.installed.as_ref().map(|f| f.expiry)
    }

    pub fn installed_serial(&self) -> u64 {
        self.installed.as_ref().map_or(0, |f| f.serial)
    }

    pub fn install_update(
        &self,
        update: &FirmwareUpdate,
        policy: &ApproverPolicy,
    ) -> Result<DeviceState, InstallError> {
        if self.mode == DeviceMode::LockedDown {
            return Err(InstallError::DeviceLockedDown);
        }
        if update.lifetime == 0 || !update.ruleset.grants.iter().all(|g| g.is_well_formed()) {
            return Err(InstallError::MalformedUpdate);
        }
        if let Approval::Reject(reason) = verify_update_approval(update, policy) {
            return Err(InstallError::ApprovalInvalid(reason));
        }
        if update.serial <= self.rollback_floor {
            return Err(InstallError::RollbackRejected {
                serial: update.serial,
                floor: self.rollback_floor,
            });
        }
        if policy.ratchet {
            if let Some(cur) = &self.installed {
                if !check_ratchet(&cur.ruleset, &update.ruleset) {
                    return Err(InstallError::RatchetViolation);
                }
            }
        }

        let mut effective = update.ruleset.grants.clone();
        for g in self.effective_grants.iter().filter(|g| g.irrevocable) {
            if !effective.contains(g) {
                effective.push(g.clone());
            }
        }

        let mut next = self.clone();
        next.installed = Some(InstalledFirmware {
            serial: update.serial,
            version: update.version,
            ruleset: update.ruleset.clone(),
            expiry: self.clock.saturating_add(update.lifetime),
        });
        next.effective_grants = effective;
        next.rollback_floor = update.serial;
        next.mode = DeviceMode::Active;
        Ok(next)
    }

    pub fn advance_clock(&self, dt: Tick) -> DeviceState {
        let mut next = self.clone();
        next.clock = self.clock.saturating_add(dt);
        if next.mode == DeviceMode::Active && next.expiry().is_some_and(|e| next.clock >= e) {
            next.mode = if next.baseline.is_some() {
                DeviceMode::BaselineFallback
            } else {
                DeviceMode::LockedDown
            };
        }
        next
    }

    pub fn extend_lifetime(
        &self,
        ext: &ExtensionCertificate,
        policy: &ApproverPolicy,
    ) -> Result<DeviceState, ExtendError> {
        if self.mode != DeviceMode::Active {
            return Err(ExtendError::AlreadyExpired);
        }
        let installed = self.installed.as_ref().ok_or(ExtendError::AlreadyExpired)?;
        if ext.target_serial != installed.serial {
            return Err(ExtendError::WrongTarget {
                target: ext.target_serial,
                installed: Some(installed.serial),
            });
        }
        if ext.new_expiry <= installed.expiry {
            return Err(ExtendError::NonMonotoneExpiry {
                new_expiry: ext.new_expiry,
                current: installed.expiry,
            });
        }
        let required = policy.extension_quorum();
        let valid = count_valid(&ext.signatures, &ext.canonical_bytes(), &policy.approvers);
        if valid < required {
            return Err(ExtendError::InsufficientSignatures { valid, required });
        }
        let mut next = self.clone();
        if let Some(f) = next.installed.as_mut() {
            f.expiry = ext.new_expiry;
        }
        Ok(next)
    }

    /// The grant set and license requirement governing the current mode.
    pub fn governing_grants(&self) -> (&[CapabilityGrant], bool) {
        match self.mode {
            DeviceMode::Active => (
                &self.effective_grants,
                self.installed.as_ref().is_some_and(|f| f.ruleset.requires_license),
            ),
            DeviceMode::BaselineFallback => match &self.baseline {
                Some(b) => (&b.grants, b.requires_license),
                None => (&[], false),
            },
            DeviceMode::LockedDown => (&[], false),
        }
    }

    pub fn has_valid_license(&self) -> bool {
        self.license
            .as_ref()
            .is_some_and(|l| l.device_id == self.device_id && self.clock < l.expiry)
    }

    pub fn evaluate_workload(&self, w: &WorkloadDescriptor) -> Verdict {
        if self.mode == DeviceMode::LockedDown {
            return Verdict::Deny(DenyReason::LockedDown);
        }
        if !w.is_well_formed() {
            return Verdict::Deny(DenyReason::InvalidWorkload);
        }
        let (grants, needs_license) = self.governing_grants();
        if needs_license && !self.has_valid_license() {
            return Verdict::Deny(DenyReason::LicenseMissingOrExpired);
        }
        evaluate_grants(grants, w, self.mode == DeviceMode::Active)
    }

    pub(crate) fn lock_down(&self) -> DeviceState {
        let mut next = self.clone();
        next.mode = DeviceMode::LockedDown;
        next
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ruleset::WorkloadClass;

    fn policy() -> ApproverPolicy {
        ApproverPolicy::all_approvers(["A", "B", "C"]).unwrap()
    }

    fn signed(serial: u64, lifetime: u64, ruleset: Ruleset) -> FirmwareUpdate {
        let mut u = FirmwareUpdate::new(serial, serial, ruleset, lifetime, 0);
        for id in ["A", "B", "C"] {
            u.sign_raw(&SigningKey::new(id));
        }
        u
    }

    fn plain(serial: u64, lifetime: u64) -> FirmwareUpdate {
        signed(serial, lifetime, Ruleset::new("r", vec![]))
    }

    fn ext(target: u64, new_expiry: u64, signers: &[&str]) -> ExtensionCertificate {
        let mut e = ExtensionCertificate::new(100, target, 0, new_expiry);
        for s in signers {
            e.sign_raw(&SigningKey::new(*s));
        }
        e
    }

    #[test]
    fn newer_serial_installs() {
        let p = policy();
        let d = DeviceState::provision("d", &p, 0)
            .install_update(&plain(3, 10), &p)
            .unwrap();
        let d = d.install_update(&plain(4, 10), &p).unwrap();
        assert_eq!(d.installed_serial(), 4);
        assert_eq!(d.mode, DeviceMode::Active);
        assert_eq!(d.rollback_floor, 4);
    }

    #[test]
    fn older_serial_is_rollback() {
        let p = policy();
        let d = DeviceState::provision("d", &p, 0)
            .install_update(&plain(4, 10), &p)
            .unwrap();
        assert_eq!(
            d.install_update(&plain(3, 10), &p),
            Err(InstallError::RollbackRejected { serial: 3, floor: 4 })
        );
        assert!(matches!(
            d.install_update(&plain(4, 10), &p),
            Err(InstallError::RollbackRejected { .. })
        ));
    }

    #[test]
    fn unapproved_update_rejected() {
        let p = policy();
        let mut u = FirmwareUpdate::new(1, 1, Ruleset::new("r", vec![]), 10, 0);
        u.sign_raw(&SigningKey::new("A"));
        let d = DeviceState::provision("d", &p, 0);
        assert!(matches!(
            d.install_update(&u, &p),
            Err(InstallError::ApprovalInvalid(_))
        ));
    }

    #[test]
    fn expiry_without_baseline_locks_down() {
        let p = policy();
        let d = DeviceState::provision("d", &p, 50)
            .install_update(&plain(1, 50), &p)
            .unwrap();
        assert_eq!(d.expiry(), Some(100));
        assert_eq!(d.advance_clock(49).mode, DeviceMode::Active);
        let locked = d.advance_clock(50);
        assert_eq!(locked.mode, DeviceMode::LockedDown);
        assert_eq!(
            locked.install_update(&plain(2, 10), &p),
            Err(InstallError::DeviceLockedDown)
        );
        assert_eq!(locked.advance_clock(1000).mode, DeviceMode::LockedDown);
    }

    #[test]
    fn expiry_with_baseline_falls_back_and_recovers() {
        let p = policy().with_baseline(Ruleset::default_baseline());
        let d = DeviceState::provision("d", &p, 50)
            .install_update(&plain(4, 50), &p)
            .unwrap()
            .advance_clock(50);
        assert_eq!(d.mode, DeviceMode::BaselineFallback);
        let d = d.install_update(&plain(5, 30), &p).unwrap();
        assert_eq!(d.mode, DeviceMode::Active);
        assert_eq!(d.expiry(), Some(130));
    }

    #[test]
    fn extension_quorum() {
        let p = policy()
            .with_extension_fraction(crate::protocol::Fraction::new(2, 3))
            .unwrap();
        let d = DeviceState::provision("d", &p, 0)
            .install_update(&plain(4, 10), &p)
            .unwrap();
        let d2 = d.extend_lifetime(&ext(4, 20, &["A", "B"]), &p).unwrap();
        assert_eq!(d2.expiry(), Some(20));
        assert_eq!(
            d.extend_lifetime(&ext(4, 20, &["A"]), &p),
            Err(ExtendError::InsufficientSignatures { valid: 1, required: 2 })
        );
        assert!(matches!(
            d.extend_lifetime(&ext(3, 20, &["A", "B"]), &p),
            Err(ExtendError::WrongTarget { target: 3, .. })
        ));
        assert!(matches!(
            d.extend_lifetime(&ext(4, 10, &["A", "B"]), &p),
            Err(ExtendError::NonMonotoneExpiry { .. })
        ));
        assert_eq!(
            d.advance_clock(10).extend_lifetime(&ext(4, 20, &["A", "B"]), &p),
            Err(ExtendError::AlreadyExpired)
        );
    }

    #[test]
    fn irrevocable_grants_carry_forward() {
        let p = policy();
        let keep = CapabilityGrant::unbounded(WorkloadClass::Inference).irrevocable();
        let d = DeviceState::provision("d", &p, 0)
            .install_update(&signed(1, 10, Ruleset::new("a", vec![keep.clone()])), &p)
            .unwrap()
            .install_update(&signed(2, 10, Ruleset::new("b", vec![])), &p)
            .unwrap()
            .install_update(&signed(3, 10, Ruleset::new("c", vec![])), &p)
            .unwrap();
        assert_eq!(d.effective_grants, vec![keep]);
        let w = WorkloadDescriptor::new(WorkloadClass::Inference, 1e20, 1000, 1e12);
        assert_eq!(d.evaluate_workload(&w), Verdict::Allow);
    }

    #[test]
    fn ratchet_mode_blocks_restriction() {
        let p = policy().with_ratchet();
        let wide = Ruleset::new("w", vec![CapabilityGrant::unbounded(WorkloadClass::Training)]);
        let narrow = Ruleset::new(
            "n",
            vec![CapabilityGrant::unbounded(WorkloadClass::Training).with_flop_limit(1e20)],
        );
        let d = DeviceState::provision("d", &p, 0)
            .install_update(&signed(1, 10, wide.clone()), &p)
            .unwrap();
        assert_eq!(
            d.install_update(&signed(2, 10, narrow), &p),
            Err(InstallError::RatchetViolation)
        );
        assert!(d.install_update(&signed(2, 10, wide), &p).is_ok());
    }

    #[test]
    fn locked_down_denies_everything() {
        let p = policy();
        let d = DeviceState::provision("d", &p, 0)
            .install_update(&plain(1, 1), &p)
            .unwrap()
            .advance_clock(1);
        for class in WorkloadClass::ALL {
            let w = WorkloadDescriptor::new(class, 0.0, 0, 0.0);
            assert_eq!(d.evaluate_workload(&w), Verdict::Deny(DenyReason::LockedDown));
        }
    }

    #[test]
    fn training_above_limit_denied_unless_authorized() {
        let p = policy();
        let rs = Ruleset::new(
            "t",
            vec![CapabilityGrant::unbounded(WorkloadClass::Training).with_flop_limit(1e24)],
        );
        let d = DeviceState::provision("d", &p, 0)
            .install_update(&signed(1, 10, rs), &p)
            .unwrap();
        let w = WorkloadDescriptor::new(WorkloadClass::Training, 2e24, 100, 1e9);
        assert_eq!(d.evaluate_workload(&w), Verdict::Deny(DenyReason::FlopLimitExceeded));
        assert_eq!(d.evaluate_workload(&w.authorized()), Verdict::Allow);
    }

    #[test]
    fn baseline_does_not_honour_authorization() {
        let p = policy().with_baseline(Ruleset::new(
            "b",
            vec![CapabilityGrant::unbounded(WorkloadClass::Training).with_flop_limit(1e10)],
        ));
        let d = DeviceState::provision("d", &p, 0);
        let w = WorkloadDescriptor::new(WorkloadClass::Training, 1e12, 1, 0.0).authorized();
        assert_eq!(d.evaluate_workload(&w), Verdict::Deny(DenyReason::FlopLimitExceeded));
    }
}

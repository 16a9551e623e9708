//! Remote attestation of the installed firmware.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{ArtifactTag, CanonicalEncode, Encoder};
use crate::protocol::artifact::Tick;
use crate::protocol::device::{DeviceMode, DeviceState};
use crate::signature::{Identity, Signature, verify_payload};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attestation {
    pub device_id: Identity,
    /// Zero when nothing is installed.
    pub serial: u64,
    pub version: u64,
    pub clock: Tick,
    pub mode: DeviceMode,
    pub signature: Signature,
}

impl CanonicalEncode for Attestation {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.tag(ArtifactTag::Attestation)
            .str(self.device_id.as_str())
            .u64(self.serial)
            .u64(self.version)
            .u64(self.clock)
            .u8(self.mode.tag());
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttestationError {
    #[error("device {0} is not in the registry")]
    UnknownDevice(Identity),
}

/// Attestation keys known to a verifier, by device id.
#[derive(Debug, Clone, Default)]
pub struct DeviceKeyRegistry {
    keys: BTreeMap<Identity, Identity>,
}

impl DeviceKeyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, device: &DeviceState) {
        self.keys
            .insert(device.device_id.clone(), device.key().identity().clone());
    }
}

impl DeviceState {
    pub fn produce_attestation(&self) -> Attestation {
        let (serial, version) = self
            .installed
            .as_ref()
            .map_or((0, 0), |f| (f.serial, f.version));
        let mut att = Attestation {
            device_id: self.device_id.clone(),
            serial,
            version,
            clock: self.clock,
            mode: self.mode,
            signature: Signature([0; 32]),
        };
        att.signature = self.key().sign(&att.canonical_bytes());
        att
    }
}

pub fn verify_attestation(
    att: &Attestation,
    registry: &DeviceKeyRegistry,
) -> Result<bool, AttestationError> {
    let key = registry
        .keys
        .get(&att.device_id)
        .ok_or_else(|| AttestationError::UnknownDevice(att.device_id.clone()))?;
    Ok(verify_payload(key, &att.canonical_bytes(), &att.signature))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::artifact::FirmwareUpdate;
    use crate::protocol::policy::ApproverPolicy;
    use crate::protocol::ruleset::Ruleset;
    use crate::signature::SigningKey;

    #[test]
    fn attest_then_verify() {
        let p = ApproverPolicy::all_approvers(["A"]).unwrap();
        let u = FirmwareUpdate::new(5, 2, Ruleset::new("r", vec![]), 10, 0)
            .with_signature(&SigningKey::new("A"));
        let d = DeviceState::provision("d", &p, 3).install_update(&u, &p).unwrap();
        let mut reg = DeviceKeyRegistry::new();
        reg.register(&d);
        let att = d.produce_attestation();
        assert_eq!((att.serial, att.version, att.clock), (5, 2, 3));
        assert_eq!(verify_attestation(&att, &reg), Ok(true));

        let mut tampered = att.clone();
        tampered.serial = 4;
        assert_eq!(verify_attestation(&tampered, &reg), Ok(false));
    }

    #[test]
    fn unknown_device() {
        let p = ApproverPolicy::all_approvers(["A"]).unwrap();
        let d = DeviceState::provision("ghost", &p, 0);
        assert_eq!(
            verify_attestation(&d.produce_attestation(), &DeviceKeyRegistry::new()),
            Err(AttestationError::UnknownDevice("ghost".into()))
        );
    }

    #[test]
    fn locked_device_attests_lockdown() {
        let p = ApproverPolicy::all_approvers(["A"]).unwrap();
        let u = FirmwareUpdate::new(1, 1, Ruleset::new("r", vec![]), 1, 0)
            .with_signature(&SigningKey::new("A"));
        let d = DeviceState::provision("d", &p, 0)
            .install_update(&u, &p)
            .unwrap()
            .advance_clock(5);
        assert_eq!(d.produce_attestation().mode, DeviceMode::LockedDown);
    }
}

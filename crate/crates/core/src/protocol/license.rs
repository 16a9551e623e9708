//! Device-bound operating licenses and auditable renewal denials.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{ArtifactTag, CanonicalEncode, Encoder};
use crate::protocol::artifact::Tick;
use crate::protocol::device::DeviceState;
use crate::protocol::policy::ApproverPolicy;
use crate::signature::{Identity, Signature, SigningKey, digest, verify_payload};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatingLicense {
    pub device_id: Identity,
    pub expiry: Tick,
    pub issuer: Identity,
    pub signature: Signature,
}

impl CanonicalEncode for OperatingLicense {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.tag(ArtifactTag::License)
            .str(self.device_id.as_str())
            .u64(self.expiry)
            .str(self.issuer.as_str());
    }
}

impl OperatingLicense {
    pub fn verify(&self) -> bool {
        verify_payload(&self.issuer, &self.canonical_bytes(), &self.signature)
    }
}

/// Signed statement that the listed devices will not be relicensed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LicenseDenial {
    pub issuer: Identity,
    pub issued_at: Tick,
    pub device_ids: Vec<Identity>,
    pub signature: Signature,
}

impl CanonicalEncode for LicenseDenial {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.tag(ArtifactTag::LicenseDenial)
            .str(self.issuer.as_str())
            .u64(self.issued_at)
            .str_list(&self.device_ids.iter().map(Identity::as_str).collect::<Vec<_>>());
    }
}

impl LicenseDenial {
    /// Hex digest of the canonical payload; cited by refused renewals.
    pub fn record_id(&self) -> String {
        hex::encode(digest(&self.canonical_bytes()))
    }

    pub fn verify(&self) -> bool {
        verify_payload(&self.issuer, &self.canonical_bytes(), &self.signature)
    }

    pub fn covers(&self, device_id: &Identity) -> bool {
        self.device_ids.contains(device_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LicenseError {
    #[error("{0} is not a configured license authority")]
    UnauthorizedIssuer(Identity),
    #[error("license for {license} applied to device {device}")]
    DeviceMismatch { license: Identity, device: Identity },
    #[error("license signature does not verify")]
    BadSignature,
    #[error("renewal for {device} refused by denial record {record_id}")]
    RenewalDenied { device: Identity, record_id: String },
}

pub fn issue_license(
    issuer: &SigningKey,
    policy: &ApproverPolicy,
    device_id: impl Into<Identity>,
    duration: Tick,
    now: Tick,
) -> Result<OperatingLicense, LicenseError> {
    if !policy.is_license_authority(issuer.identity()) {
        return Err(LicenseError::UnauthorizedIssuer(issuer.identity().clone()));
    }
    let mut lic = OperatingLicense {
        device_id: device_id.into(),
        expiry: now.saturating_add(duration),
        issuer: issuer.identity().clone(),
        signature: Signature([0; 32]),
    };
    lic.signature = issuer.sign(&lic.canonical_bytes());
    Ok(lic)
}

pub fn deny_renewal(
    issuer: &SigningKey,
    policy: &ApproverPolicy,
    device_ids: &[Identity],
    now: Tick,
) -> Result<LicenseDenial, LicenseError> {
    if !policy.is_license_authority(issuer.identity()) {
        return Err(LicenseError::UnauthorizedIssuer(issuer.identity().clone()));
    }
    let mut rec = LicenseDenial {
        issuer: issuer.identity().clone(),
        issued_at: now,
        device_ids: device_ids.to_vec(),
        signature: Signature([0; 32]),
    };
    rec.signature = issuer.sign(&rec.canonical_bytes());
    Ok(rec)
}

/// A license authority that remembers the renewals it has refused.
#[derive(Debug, Clone)]
pub struct LicenseAuthority {
    key: SigningKey,
    denials: Vec<LicenseDenial>,
}

impl LicenseAuthority {
    pub fn new(key: SigningKey) -> Self {
        LicenseAuthority {
            key,
            denials: Vec::new(),
        }
    }

    pub fn identity(&self) -> &Identity {
        self.key.identity()
    }

    pub fn denials(&self) -> &[LicenseDenial] {
        &self.denials
    }

    pub fn issue(
        &self,
        policy: &ApproverPolicy,
        device_id: &Identity,
        duration: Tick,
        now: Tick,
    ) -> Result<OperatingLicense, LicenseError> {
        if let Some(rec) = self.denials.iter().find(|d| d.covers(device_id)) {
            return Err(LicenseError::RenewalDenied {
                device: device_id.clone(),
                record_id: rec.record_id(),
            });
        }
        issue_license(&self.key, policy, device_id.clone(), duration, now)
    }

    pub fn deny_renewal(
        &mut self,
        policy: &ApproverPolicy,
        device_ids: &[Identity],
        now: Tick,
    ) -> Result<LicenseDenial, LicenseError> {
        let rec = deny_renewal(&self.key, policy, device_ids, now)?;
        self.denials.push(rec.clone());
        Ok(rec)
    }
}

impl DeviceState {
    pub fn apply_license(
        &self,
        license: &OperatingLicense,
        policy: &ApproverPolicy,
    ) -> Result<DeviceState, LicenseError> {
        if license.device_id != self.device_id {
            return Err(LicenseError::DeviceMismatch {
                license: license.device_id.clone(),
                device: self.device_id.clone(),
            });
        }
        if !policy.is_license_authority(&license.issuer) {
            return Err(LicenseError::UnauthorizedIssuer(license.issuer.clone()));
        }
        if !license.verify() {
            return Err(LicenseError::BadSignature);
        }
        let mut next = self.clone();
        next.license = Some(license.clone());
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::artifact::FirmwareUpdate;
    use crate::protocol::ruleset::{
        CapabilityGrant, DenyReason, Ruleset, Verdict, WorkloadClass, WorkloadDescriptor,
    };

    fn policy() -> ApproverPolicy {
        ApproverPolicy::all_approvers(["A"])
            .unwrap()
            .with_license_authority("L")
    }

    fn licensed_device(p: &ApproverPolicy) -> DeviceState {
        let rs = Ruleset::new("r", vec![CapabilityGrant::unbounded(WorkloadClass::Inference)])
            .requiring_license();
        let u = FirmwareUpdate::new(1, 1, rs, 1000, 0).with_signature(&SigningKey::new("A"));
        DeviceState::provision("d1", p, 0).install_update(&u, p).unwrap()
    }

    #[test]
    fn license_gates_workloads() {
        let p = policy();
        let w = WorkloadDescriptor::new(WorkloadClass::Inference, 1.0, 1, 1.0);
        let d = licensed_device(&p);
        assert_eq!(
            d.evaluate_workload(&w),
            Verdict::Deny(DenyReason::LicenseMissingOrExpired)
        );
        let lic = issue_license(&SigningKey::new("L"), &p, "d1", 100, 0).unwrap();
        assert_eq!(lic.expiry, 100);
        let d = d.apply_license(&lic, &p).unwrap();
        assert_eq!(d.evaluate_workload(&w), Verdict::Allow);
        assert_eq!(d.advance_clock(99).evaluate_workload(&w), Verdict::Allow);
        assert_eq!(
            d.advance_clock(100).evaluate_workload(&w),
            Verdict::Deny(DenyReason::LicenseMissingOrExpired)
        );
    }

    #[test]
    fn unauthorized_issuer() {
        let p = policy();
        assert_eq!(
            issue_license(&SigningKey::new("A"), &p, "d1", 10, 0),
            Err(LicenseError::UnauthorizedIssuer("A".into()))
        );
    }

    #[test]
    fn license_bound_to_one_device() {
        let p = policy();
        let lic = issue_license(&SigningKey::new("L"), &p, "d2", 10, 0).unwrap();
        assert!(matches!(
            licensed_device(&p).apply_license(&lic, &p),
            Err(LicenseError::DeviceMismatch { .. })
        ));
    }

    #[test]
    fn tampered_license_rejected() {
        let p = policy();
        let mut lic = issue_license(&SigningKey::new("L"), &p, "d1", 10, 0).unwrap();
        lic.expiry = 1_000_000;
        assert_eq!(
            licensed_device(&p).apply_license(&lic, &p),
            Err(LicenseError::BadSignature)
        );
    }

    #[test]
    fn denied_renewal_cites_record() {
        let p = policy();
        let mut auth = LicenseAuthority::new(SigningKey::new("L"));
        let rec = auth
            .deny_renewal(&p, &["d1".into(), "d2".into()], 5)
            .unwrap();
        assert!(rec.verify());
        match auth.issue(&p, &"d1".into(), 10, 6) {
            Err(LicenseError::RenewalDenied { record_id, .. }) => {
                assert_eq!(record_id, rec.record_id())
            }
            other => panic!("expected denial, got {other:?}"),
        }
        assert!(auth.issue(&p, &"d3".into(), 10, 6).is_ok());
    }
}

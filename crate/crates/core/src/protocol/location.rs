//! Landmark-based location checks. Reported distances are trusted as given.

use std::collections::BTreeSet;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::encoding::{ArtifactTag, CanonicalEncode, Encoder};
use crate::protocol::artifact::Tick;
use crate::protocol::device::DeviceState;
use crate::signature::{Identity, Signature, SigningKey, verify_payload};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct LocationConfig {
    pub landmarks: BTreeSet<Identity>,
    /// Kilometres.
    pub max_distance: f64,
    /// Lock the device down when a check fails.
    #[serde(default)]
    pub enforce: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkResponse {
    pub landmark: Identity,
    pub device_id: Identity,
    pub tick: Tick,
    pub distance: f64,
    pub signature: Signature,
}

impl CanonicalEncode for LandmarkResponse {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.tag(ArtifactTag::LandmarkResponse)
            .str(self.landmark.as_str())
            .str(self.device_id.as_str())
            .u64(self.tick)
            .f64(self.distance);
    }
}

impl LandmarkResponse {
    pub fn signed(landmark: &SigningKey, device_id: Identity, tick: Tick, distance: f64) -> Self {
        let mut r = LandmarkResponse {
            landmark: landmark.identity().clone(),
            device_id,
            tick,
            distance,
            signature: Signature([0; 32]),
        };
        r.signature = landmark.sign(&r.canonical_bytes());
        r
    }

    pub fn verify(&self) -> bool {
        verify_payload(&self.landmark, &self.canonical_bytes(), &self.signature)
    }
}

impl DeviceState {
    /// True iff some response is validly signed by a configured landmark,
    /// names this device, and reports a distance within the limit. A failed
    /// check under enforcement locks the device down. Devices without a
    /// location configuration always fail and are left unchanged.
    pub fn verify_location(&self, responses: &[LandmarkResponse]) -> (bool, DeviceState) {
        let Some(cfg) = &self.location else {
            return (false, self.clone());
        };
        let ok = responses.iter().any(|r| {
            cfg.landmarks.contains(&r.landmark)
                && r.device_id == self.device_id
                && r.distance.is_finite()
                && r.distance <= cfg.max_distance
                && r.verify()
        });
        if !ok && cfg.enforce {
            (false, self.lock_down())
        } else {
            (ok, self.clone())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::device::DeviceMode;
    use crate::protocol::policy::ApproverPolicy;

    fn device(enforce: bool) -> DeviceState {
        let p = ApproverPolicy::all_approvers(["A"]).unwrap();
        DeviceState::provision("d", &p, 0).with_location(LocationConfig {
            landmarks: ["L1".into()].into_iter().collect(),
            max_distance: 100.0,
            enforce,
        })
    }

    #[test]
    fn close_configured_landmark_passes() {
        let r = LandmarkResponse::signed(&SigningKey::new("L1"), "d".into(), 0, 40.0);
        let (ok, d) = device(true).verify_location(&[r]);
        assert!(ok);
        assert_eq!(d.mode, DeviceMode::BaselineFallback);
    }

    #[test]
    fn unconfigured_landmark_fails() {
        let r = LandmarkResponse::signed(&SigningKey::new("L9"), "d".into(), 0, 1.0);
        assert!(!device(false).verify_location(&[r]).0);
    }

    #[test]
    fn too_far_locks_down() {
        let r = LandmarkResponse::signed(&SigningKey::new("L1"), "d".into(), 0, 100.5);
        let (ok, d) = device(true).verify_location(&[r]);
        assert!(!ok);
        assert_eq!(d.mode, DeviceMode::LockedDown);
    }

    #[test]
    fn forged_response_fails() {
        let mut r = LandmarkResponse::signed(&SigningKey::new("L1"), "d".into(), 0, 500.0);
        r.distance = 5.0;
        assert!(!device(false).verify_location(&[r]).0);
    }

    #[test]
    fn response_for_other_device_fails() {
        let r = LandmarkResponse::signed(&SigningKey::new("L1"), "other".into(), 0, 5.0);
        assert!(!device(false).verify_location(&[r]).0);
    }

    #[test]
    fn boundary_distance_is_inside() {
        let r = LandmarkResponse::signed(&SigningKey::new("L1"), "d".into(), 0, 100.0);
        assert!(device(true).verify_location(&[r]).0);
    }
}

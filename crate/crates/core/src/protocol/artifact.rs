//! Signed, serial-numbered artifacts: firmware updates and lifetime
//! extensions.

use std::collections::BTreeMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::encoding::{ArtifactTag, CanonicalEncode, Encoder};
use crate::protocol::ruleset::Ruleset;
use crate::signature::{Identity, Signature, SigningKey, digest, verify_payload};

pub type Tick = u64;
pub type Signatures = BTreeMap<Identity, Signature>;

/// Half-open tick interval `[start, end)`. Windows that merely touch do not
/// overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
pub struct Window {
    pub start: Tick,
    pub end: Tick,
}

impl Window {
    pub fn new(start: Tick, end: Tick) -> Self {
        Window { start, end }
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Window) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl std::fmt::Display for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FirmwareUpdate {
    pub serial: u64,
    pub version: u64,
    pub ruleset: Ruleset,
    /// Ticks of validity after installation.
    pub lifetime: u64,
    pub issued_at: Tick,
    #[serde(default)]
    pub signatures: Signatures,
}

impl FirmwareUpdate {
    pub fn new(serial: u64, version: u64, ruleset: Ruleset, lifetime: u64, issued_at: Tick) -> Self {
        FirmwareUpdate {
            serial,
            version,
            ruleset,
            lifetime,
            issued_at,
            signatures: Signatures::new(),
        }
    }

    /// The interval during which the issuer asserts this update is current.
    pub fn window(&self) -> Window {
        Window::new(self.issued_at, self.issued_at.saturating_add(self.lifetime))
    }

    /// Adds a signature by `key` over the canonical bytes, bypassing any
    /// signer transcript. Honest approvers go through
    /// [`SignerDevice`](crate::protocol::SignerDevice) instead.
    pub fn sign_raw(&mut self, key: &SigningKey) {
        let sig = key.sign(&self.canonical_bytes());
        self.signatures.insert(key.identity().clone(), sig);
    }

    pub fn with_signature(mut self, key: &SigningKey) -> Self {
        self.sign_raw(key);
        self
    }
}

impl CanonicalEncode for FirmwareUpdate {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.tag(ArtifactTag::FirmwareUpdate)
            .u64(self.serial)
            .u64(self.version);
        self.ruleset.encode_into(enc);
        enc.u64(self.lifetime).u64(self.issued_at);
    }
}

/// Quorum-signed extension of an installed update's expiry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ExtensionCertificate {
    /// Position in the signer serial stream, shared with updates.
    pub serial: u64,
    pub target_serial: u64,
    pub issued_at: Tick,
    pub new_expiry: Tick,
    #[serde(default)]
    pub signatures: Signatures,
}

impl ExtensionCertificate {
    pub fn new(serial: u64, target_serial: u64, issued_at: Tick, new_expiry: Tick) -> Self {
        ExtensionCertificate {
            serial,
            target_serial,
            issued_at,
            new_expiry,
            signatures: Signatures::new(),
        }
    }

    pub fn window(&self) -> Window {
        Window::new(self.issued_at, self.new_expiry)
    }

    pub fn sign_raw(&mut self, key: &SigningKey) {
        let sig = key.sign(&self.canonical_bytes());
        self.signatures.insert(key.identity().clone(), sig);
    }

    pub fn with_signature(mut self, key: &SigningKey) -> Self {
        self.sign_raw(key);
        self
    }
}

impl CanonicalEncode for ExtensionCertificate {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.tag(ArtifactTag::Extension)
            .u64(self.serial)
            .u64(self.target_serial)
            .u64(self.issued_at)
            .u64(self.new_expiry);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Update,
    Extension,
}

/// Either kind of signer-issued artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignedArtifact {
    Update(FirmwareUpdate),
    Extension(ExtensionCertificate),
}

impl SignedArtifact {
    pub fn kind(&self) -> ArtifactKind {
        match self {
            SignedArtifact::Update(_) => ArtifactKind::Update,
            SignedArtifact::Extension(_) => ArtifactKind::Extension,
        }
    }

    pub fn serial(&self) -> u64 {
        match self {
            SignedArtifact::Update(u) => u.serial,
            SignedArtifact::Extension(e) => e.serial,
        }
    }

    pub fn window(&self) -> Window {
        match self {
            SignedArtifact::Update(u) => u.window(),
            SignedArtifact::Extension(e) => e.window(),
        }
    }

    /// Serial of the firmware this artifact keeps live during its window.
    pub fn designates(&self) -> u64 {
        match self {
            SignedArtifact::Update(u) => u.serial,
            SignedArtifact::Extension(e) => e.target_serial,
        }
    }

    pub fn signatures(&self) -> &Signatures {
        match self {
            SignedArtifact::Update(u) => &u.signatures,
            SignedArtifact::Extension(e) => &e.signatures,
        }
    }

    pub fn signatures_mut(&mut self) -> &mut Signatures {
        match self {
            SignedArtifact::Update(u) => &mut u.signatures,
            SignedArtifact::Extension(e) => &mut e.signatures,
        }
    }

    pub fn payload_digest(&self) -> [u8; 32] {
        digest(&self.canonical_bytes())
    }

    /// Identities whose signature over this artifact verifies.
    pub fn valid_signers(&self) -> Vec<Identity> {
        let bytes = self.canonical_bytes();
        self.signatures()
            .iter()
            .filter(|(id, sig)| verify_payload(id, &bytes, sig))
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn sign_raw(&mut self, key: &SigningKey) {
        let sig = key.sign(&self.canonical_bytes());
        self.signatures_mut().insert(key.identity().clone(), sig);
    }
}

impl CanonicalEncode for SignedArtifact {
    fn encode_into(&self, enc: &mut Encoder) {
        match self {
            SignedArtifact::Update(u) => u.encode_into(enc),
            SignedArtifact::Extension(e) => e.encode_into(enc),
        }
    }
}

impl From<FirmwareUpdate> for SignedArtifact {
    fn from(u: FirmwareUpdate) -> Self {
        SignedArtifact::Update(u)
    }
}

impl From<ExtensionCertificate> for SignedArtifact {
    fn from(e: ExtensionCertificate) -> Self {
        SignedArtifact::Extension(e)
    }
}

/// Counts distinct identities from `allowed` whose signature verifies over
/// `payload`. Signatures from anyone else are ignored.
pub(crate) fn count_valid<'a>(
    signatures: &Signatures,
    payload: &[u8],
    allowed: impl IntoIterator<Item = &'a Identity>,
) -> usize {
    allowed
        .into_iter()
        .filter(|id| {
            signatures
                .get(*id)
                .is_some_and(|sig| verify_payload(id, payload, sig))
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ruleset::Ruleset;

    fn update(serial: u64) -> FirmwareUpdate {
        FirmwareUpdate::new(serial, 1, Ruleset::new("r0", vec![]), 10, 0)
    }

    #[test]
    fn encoding_is_deterministic() {
        let u = update(1);
        assert_eq!(u.canonical_bytes(), u.canonical_bytes());
    }

    #[test]
    fn serial_changes_encoding() {
        assert_ne!(update(1).canonical_bytes(), update(2).canonical_bytes());
    }

    #[test]
    fn signatures_are_not_encoded() {
        let u = update(1);
        let signed = u.clone().with_signature(&SigningKey::new("A"));
        assert_eq!(u.canonical_bytes(), signed.canonical_bytes());
    }

    #[test]
    fn update_and_extension_never_share_bytes() {
        let e = ExtensionCertificate::new(1, 1, 0, 10);
        assert_ne!(update(1).canonical_bytes()[0], e.canonical_bytes()[0]);
    }

    #[test]
    fn touching_windows_do_not_overlap() {
        assert!(!Window::new(0, 10).overlaps(&Window::new(10, 20)));
        assert!(Window::new(0, 11).overlaps(&Window::new(10, 20)));
    }
}

//! Identities and the deterministic mock signature scheme.
//!
//! A signature is `SHA-256(len_be32(identity) || identity || payload)`.
//! Anyone who knows an identity can produce its signatures, so this scheme
//! only models *who signed what*; it is not a security boundary. Swapping in
//! a real unforgeable scheme only requires keeping [`SigningKey::sign`] and
//! [`verify_payload`] semantics.

use std::borrow::Cow;
use std::fmt;

use schemars::{JsonSchema, Schema, SchemaGenerator, json_schema};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

/// Public identity of an approver, device, license authority or landmark.
#[derive(
    Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema,
)]
#[serde(transparent)]
pub struct Identity(String);

impl Identity {
    pub fn new(id: impl Into<String>) -> Self {
        Identity(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Identity {
    fn from(s: &str) -> Self {
        Identity::new(s)
    }
}

impl From<String> for Identity {
    fn from(s: String) -> Self {
        Identity(s)
    }
}

/// A 32-byte signature, serialized as lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Signature(pub [u8; 32]);

impl Signature {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)?;
        Ok(Signature(out))
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", &self.to_hex()[..16])
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(serde::de::Error::custom("signature hex must be lowercase"));
        }
        Signature::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

impl JsonSchema for Signature {
    fn schema_name() -> Cow<'static, str> {
        "Signature".into()
    }

    fn json_schema(_: &mut SchemaGenerator) -> Schema {
        json_schema!({
            "type": "string",
            "pattern": "^[0-9a-f]{64}$",
            "description": "32-byte signature as lowercase hex"
        })
    }
}

/// Signing key bound to one identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigningKey {
    identity: Identity,
}

impl SigningKey {
    pub fn new(identity: impl Into<Identity>) -> Self {
        SigningKey {
            identity: identity.into(),
        }
    }

    pub fn identity(&self) -> &Identity {
        &self.identity
    }

    pub fn sign(&self, payload: &[u8]) -> Signature {
        mock_digest(&self.identity, payload)
    }
}

pub fn sign_payload(key: &SigningKey, payload: &[u8]) -> Signature {
    key.sign(payload)
}

/// True iff `sig` was produced by `identity`'s key over exactly `payload`.
pub fn verify_payload(identity: &Identity, payload: &[u8], sig: &Signature) -> bool {
    mock_digest(identity, payload) == *sig
}

/// SHA-256 digest of arbitrary bytes; used for artifact fingerprints.
pub fn digest(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

fn mock_digest(identity: &Identity, payload: &[u8]) -> Signature {
    let id = identity.as_str().as_bytes();
    let len = u32::try_from(id.len()).expect("identity longer than u32::MAX");
    let mut h = Sha256::new();
    h.update(len.to_be_bytes());
    h.update(id);
    h.update(payload);
    Signature(h.finalize().into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_then_verify() {
        let k = SigningKey::new("A");
        let sig = k.sign(b"payload");
        assert!(verify_payload(k.identity(), b"payload", &sig));
    }

    #[test]
    fn flipped_bit_fails() {
        let k = SigningKey::new("A");
        let sig = k.sign(b"payload");
        let mut tampered = b"payload".to_vec();
        tampered[3] ^= 0x01;
        assert!(!verify_payload(k.identity(), &tampered, &sig));
    }

    #[test]
    fn wrong_identity_fails() {
        let sig = SigningKey::new("A").sign(b"payload");
        assert!(!verify_payload(&Identity::new("B"), b"payload", &sig));
    }

    #[test]
    fn identity_boundary_is_unambiguous() {
        // "AB" + "C" must not collide with "A" + "BC".
        let s1 = SigningKey::new("AB").sign(b"C");
        let s2 = SigningKey::new("A").sign(b"BC");
        assert_ne!(s1, s2);
    }

    #[test]
    fn hex_round_trip_rejects_uppercase() {
        let sig = SigningKey::new("A").sign(b"x");
        let json = serde_json::to_string(&sig).unwrap();
        assert_eq!(serde_json::from_str::<Signature>(&json).unwrap(), sig);
        let upper = json.to_uppercase();
        assert!(serde_json::from_str::<Signature>(&upper).is_err());
    }
}

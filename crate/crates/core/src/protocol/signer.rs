//! Approver keys held behind an append-only transcript.
//!
//! A [`SignerDevice`] refuses to sign anything that would let two different
//! firmware versions be live at the same tick under its signature. Each
//! entry records the artifact's window and the firmware serial it keeps
//! live; the transcript head is a SHA-256 hash chain over all entries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::CanonicalEncode;
use crate::protocol::artifact::{ArtifactKind, ExtensionCertificate, FirmwareUpdate, SignedArtifact, Window};
use crate::signature::{Identity, Signature, SigningKey, digest};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub kind: ArtifactKind,
    pub serial: u64,
    pub window: Window,
    pub designates: u64,
    #[serde(with = "hex::serde")]
    pub payload_digest: [u8; 32],
}

impl TranscriptEntry {
    fn chain_bytes(&self) -> Vec<u8> {
        let mut v = Vec::with_capacity(1 + 8 * 4 + 32);
        v.push(match self.kind {
            ArtifactKind::Update => 0,
            ArtifactKind::Extension => 1,
        });
        for x in [self.serial, self.window.start, self.window.end, self.designates] {
            v.extend_from_slice(&x.to_be_bytes());
        }
        v.extend_from_slice(&self.payload_digest);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SignError {
    #[error("serial {serial} is not above last signed serial {last}")]
    SerialRegression { serial: u64, last: u64 },
    #[error("window {window} conflicts with transcript entry for serial {existing_serial}")]
    ConflictingWindow { window: Window, existing_serial: u64 },
    #[error("artifact window {0} is empty")]
    EmptyWindow(Window),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignerDevice {
    key: SigningKey,
    next_serial: u64,
    transcript: Vec<TranscriptEntry>,
    head: [u8; 32],
}

impl SignerDevice {
    pub fn new(key: SigningKey) -> Self {
        SignerDevice {
            key,
            next_serial: 1,
            transcript: Vec::new(),
            head: [0; 32],
        }
    }

    pub fn identity(&self) -> &Identity {
        self.key.identity()
    }

    pub fn next_serial(&self) -> u64 {
        self.next_serial
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    /// Hash-chain head over every transcript entry so far.
    pub fn transcript_head(&self) -> [u8; 32] {
        self.head
    }

    pub fn approver_sign_update(
        &self,
        update: &FirmwareUpdate,
    ) -> Result<(Signature, SignerDevice), SignError> {
        self.sign_artifact(&SignedArtifact::Update(update.clone()))
    }

    pub fn approver_sign_extension(
        &self,
        ext: &ExtensionCertificate,
    ) -> Result<(Signature, SignerDevice), SignError> {
        self.sign_artifact(&SignedArtifact::Extension(ext.clone()))
    }

    /// Signs `artifact` if doing so keeps at most one firmware version live
    /// per tick and the serial stream increasing. Re-signing an identical
    /// payload returns the same signature and leaves the transcript as is.
    pub fn sign_artifact(
        &self,
        artifact: &SignedArtifact,
    ) -> Result<(Signature, SignerDevice), SignError> {
        let bytes = artifact.canonical_bytes();
        let payload_digest = digest(&bytes);
        let serial = artifact.serial();
        let window = artifact.window();
        let designates = artifact.designates();

        if self
            .transcript
            .iter()
            .any(|e| e.serial == serial && e.payload_digest == payload_digest)
        {
            return Ok((self.key.sign(&bytes), self.clone()));
        }
        if window.is_empty() {
            return Err(SignError::EmptyWindow(window));
        }
        if let Some(e) = self.transcript.iter().find(|e| {
            e.window.overlaps(&window) && (e.designates != designates || e.serial == serial)
        }) {
            return Err(SignError::ConflictingWindow {
                window,
                existing_serial: e.serial,
            });
        }
        if serial < self.next_serial {
            return Err(SignError::SerialRegression {
                serial,
                last: self.next_serial - 1,
            });
        }

        let entry = TranscriptEntry {
            kind: artifact.kind(),
            serial,
            window,
            designates,
            payload_digest,
        };
        let mut next = self.clone();
        let mut chained = next.head.to_vec();
        chained.extend_from_slice(&entry.chain_bytes());
        next.head = digest(&chained);
        next.transcript.push(entry);
        next.next_serial = serial + 1;
        Ok((self.key.sign(&bytes), next))
    }
}

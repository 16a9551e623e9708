//! Detection of signers that kept two firmware versions live at once.
//!
//! Two artifacts validly signed by the same approver conflict when
//!
//! - they carry the same serial but different payloads (`DuplicateSerial`), or
//! - their windows overlap while keeping different firmware serials live
//!   (`OverlappingWindows`).
//!
//! Identical payloads never conflict. Each conflicting pair is reported once
//! per signer; a pair that meets both conditions is reported as
//! `DuplicateSerial`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::protocol::artifact::{SignedArtifact, Window};
use crate::signature::Identity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConflictKind {
    DuplicateSerial,
    OverlappingWindows,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Conflict {
    /// Index of the earlier artifact in the input.
    pub first: usize,
    pub second: usize,
    pub signer: Identity,
    pub kind: ConflictKind,
}

struct Signed {
    index: usize,
    serial: u64,
    window: Window,
    designates: u64,
    digest: [u8; 32],
}

/// All conflicts among `artifacts`, sorted by `(first, second, signer)`.
pub fn detect_equivocation(artifacts: &[SignedArtifact]) -> Vec<Conflict> {
    let mut by_signer: BTreeMap<Identity, Vec<Signed>> = BTreeMap::new();
    for (index, a) in artifacts.iter().enumerate() {
        let digest = a.payload_digest();
        for signer in a.valid_signers() {
            by_signer.entry(signer).or_default().push(Signed {
                index,
                serial: a.serial(),
                window: a.window(),
                designates: a.designates(),
                digest,
            });
        }
    }

    let mut found: BTreeMap<(usize, usize, Identity), ConflictKind> = BTreeMap::new();
    for (signer, mut entries) in by_signer {
        let mut by_serial: HashMap<u64, Vec<usize>> = HashMap::new();
        for (pos, e) in entries.iter().enumerate() {
            by_serial.entry(e.serial).or_default().push(pos);
        }
        for positions in by_serial.values() {
            for (n, &p) in positions.iter().enumerate() {
                for &q in &positions[n + 1..] {
                    if entries[p].digest != entries[q].digest {
                        let (i, j) = ordered(entries[p].index, entries[q].index);
                        found.insert((i, j, signer.clone()), ConflictKind::DuplicateSerial);
                    }
                }
            }
        }

        // sweep over windows sorted by start
        entries.sort_by_key(|e| (e.window.start, e.window.end, e.index));
        let mut active: Vec<&Signed> = Vec::new();
        for e in &entries {
            active.retain(|a| a.window.end > e.window.start);
            if e.window.is_empty() {
                continue;
            }
            for a in &active {
                if a.designates != e.designates {
                    let (i, j) = ordered(a.index, e.index);
                    found
                        .entry((i, j, signer.clone()))
                        .or_insert(ConflictKind::OverlappingWindows);
                }
            }
            active.push(e);
        }
    }

    found
        .into_iter()
        .map(|((first, second, signer), kind)| Conflict {
            first,
            second,
            signer,
            kind,
        })
        .collect()
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a <= b { (a, b) } else { (b, a) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::artifact::{ExtensionCertificate, FirmwareUpdate};
    use crate::protocol::ruleset::Ruleset;
    use crate::protocol::signer::SignerDevice;
    use crate::signature::SigningKey;

    fn upd(serial: u64, start: u64, lifetime: u64) -> FirmwareUpdate {
        FirmwareUpdate::new(serial, serial, Ruleset::new("r", vec![]), lifetime, start)
    }

    #[test]
    fn honest_output_is_clean() {
        let mut s = SignerDevice::new(SigningKey::new("A"));
        let mut out: Vec<SignedArtifact> = Vec::new();
        for (serial, start) in [(1u64, 0u64), (2, 10), (3, 20)] {
            let mut u = upd(serial, start, 10);
            let (sig, next) = s.approver_sign_update(&u).unwrap();
            u.signatures.insert("A".into(), sig);
            out.push(u.into());
            s = next;
        }
        let mut e = ExtensionCertificate::new(4, 3, 25, 40);
        let (sig, _) = s.approver_sign_extension(&e).unwrap();
        e.signatures.insert("A".into(), sig);
        out.push(e.into());
        assert!(detect_equivocation(&out).is_empty());
    }

    #[test]
    fn secret_extension_of_previous_version() {
        let k = SigningKey::new("A");
        let new = upd(5, 0, 90).with_signature(&k);
        let old_ext = ExtensionCertificate::new(6, 4, 0, 60).with_signature(&k);
        let found = detect_equivocation(&[new.into(), old_ext.into()]);
        assert_eq!(
            found,
            vec![Conflict {
                first: 0,
                second: 1,
                signer: "A".into(),
                kind: ConflictKind::OverlappingWindows
            }]
        );
    }

    #[test]
    fn duplicate_serial_without_overlap() {
        let k = SigningKey::new("A");
        let a = upd(3, 0, 10).with_signature(&k);
        let mut b = upd(3, 50, 10);
        b.version = 9;
        let b = b.with_signature(&k);
        let found = detect_equivocation(&[a.into(), b.into()]);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].kind, ConflictKind::DuplicateSerial);
    }

    #[test]
    fn identical_copies_are_not_conflicts() {
        let k = SigningKey::new("A");
        let a: SignedArtifact = upd(3, 0, 10).with_signature(&k).into();
        assert!(detect_equivocation(&[a.clone(), a]).is_empty());
    }

    #[test]
    fn different_signers_do_not_conflict() {
        let a = upd(5, 0, 90).with_signature(&SigningKey::new("A"));
        let b = ExtensionCertificate::new(6, 4, 0, 60).with_signature(&SigningKey::new("B"));
        assert!(detect_equivocation(&[a.into(), b.into()]).is_empty());
    }

    #[test]
    fn invalid_signatures_ignored() {
        let k = SigningKey::new("A");
        let a = upd(5, 0, 90).with_signature(&k);
        let mut b = ExtensionCertificate::new(6, 4, 0, 60).with_signature(&k);
        b.new_expiry = 61; // invalidates A's signature
        assert!(detect_equivocation(&[a.into(), b.into()]).is_empty());
    }

    #[test]
    fn reported_per_signer() {
        let a = upd(5, 0, 90)
            .with_signature(&SigningKey::new("A"))
            .with_signature(&SigningKey::new("B"));
        let b = ExtensionCertificate::new(6, 4, 0, 60)
            .with_signature(&SigningKey::new("A"))
            .with_signature(&SigningKey::new("B"));
        let found = detect_equivocation(&[a.into(), b.into()]);
        let signers: Vec<_> = found.iter().map(|c| c.signer.as_str()).collect();
        assert_eq!(signers, ["A", "B"]);
    }
}

//! The ruleset-update protocol: signed firmware updates with bounded
//! lifetimes, quorum extensions, rollback protection, equivocation-resistant
//! signer devices, plus operating licenses, location checks and attestation.

mod artifact;
mod attestation;
mod device;
mod equivocation;
mod license;
mod location;
mod policy;
mod ruleset;
mod signer;

pub use artifact::{
    ArtifactKind, ExtensionCertificate, FirmwareUpdate, SignedArtifact, Signatures, Tick, Window,
};
pub use attestation::{Attestation, AttestationError, DeviceKeyRegistry, verify_attestation};
pub use device::{DeviceMode, DeviceState, ExtendError, InstallError, InstalledFirmware};
pub use equivocation::{Conflict, ConflictKind, detect_equivocation};
pub use license::{
    LicenseAuthority, LicenseDenial, LicenseError, OperatingLicense, deny_renewal, issue_license,
};
pub use location::{LandmarkResponse, LocationConfig};
pub use policy::{
    Approval, ApproverPolicy, Fraction, PolicyError, RejectReason, UpdateRule,
    verify_update_approval,
};
pub use ruleset::{
    CapabilityGrant, DenyReason, Limit, Ruleset, Verdict, WorkloadClass, WorkloadDescriptor,
    check_ratchet,
};
pub use signer::{SignError, SignerDevice, TranscriptEntry};

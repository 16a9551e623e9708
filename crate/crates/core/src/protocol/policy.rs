//! Approver sets, approval rules and extension quorums.

use std::collections::BTreeSet;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::CanonicalEncode;
use crate::protocol::artifact::{FirmwareUpdate, count_valid};
use crate::protocol::ruleset::Ruleset;
use crate::signature::{Identity, verify_payload};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UpdateRule {
    /// Every approver must sign; any one of them can veto.
    AllApprovers,
    /// At least `k` of the `n` approvers must sign.
    Threshold { k: usize, n: usize },
}

/// A rational number `num / den` in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Self {
        Fraction { num, den }
    }

    /// Smallest fraction that is a strict majority of `n`.
    pub fn strict_majority(n: usize) -> Self {
        let n = n as u64;
        Fraction::new(n / 2 + 1, n.max(1))
    }

    /// `ceil(self * n)`.
    pub fn ceil_of(&self, n: usize) -> usize {
        let n = n as u64;
        (self.num * n).div_ceil(self.den) as usize
    }

    fn is_valid(&self) -> bool {
        self.den > 0 && self.num > 0 && self.num <= self.den
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("approver set is empty")]
    NoApprovers,
    #[error("approver {0} listed twice")]
    DuplicateApprover(Identity),
    #[error("threshold {k}-of-{n} invalid for {approvers} approvers")]
    BadThreshold { k: usize, n: usize, approvers: usize },
    #[error("extension fraction {num}/{den} outside (0, 1]")]
    BadFraction { num: u64, den: u64 },
    #[error("baseline grant with negative or non-finite limit")]
    MalformedBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ApproverPolicy {
    pub approvers: Vec<Identity>,
    pub update_rule: UpdateRule,
    pub extension_fraction: Fraction,
    /// Ruleset devices fall back to on expiry. Without one they lock down.
    #[serde(default)]
    pub baseline: Option<Ruleset>,
    /// Reject installs that are less permissive than the current ruleset.
    #[serde(default)]
    pub ratchet: bool,
    /// Identities allowed to issue and deny operating licenses.
    #[serde(default)]
    pub license_authorities: Vec<Identity>,
}

impl ApproverPolicy {
    /// All-approvers policy with a strict-majority extension quorum.
    pub fn all_approvers<I, S>(approvers: I) -> Result<Self, PolicyError>
    where
        I: IntoIterator<Item = S>,
        S: Into<Identity>,
    {
        let approvers: Vec<Identity> = approvers.into_iter().map(Into::into).collect();
        let n = approvers.len();
        let p = ApproverPolicy {
            approvers,
            update_rule: UpdateRule::AllApprovers,
            extension_fraction: Fraction::strict_majority(n),
            baseline: None,
            ratchet: false,
            license_authorities: Vec::new(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn threshold<I, S>(k: usize, approvers: I) -> Result<Self, PolicyError>
    where
        I: IntoIterator<Item = S>,
        S: Into<Identity>,
    {
        let mut p = Self::all_approvers(approvers)?;
        p.update_rule = UpdateRule::Threshold {
            k,
            n: p.approvers.len(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_baseline(mut self, baseline: Ruleset) -> Self {
        self.baseline = Some(baseline);
        self
    }

    pub fn with_extension_fraction(mut self, f: Fraction) -> Result<Self, PolicyError> {
        self.extension_fraction = f;
        self.validate()?;
        Ok(self)
    }

    pub fn with_ratchet(mut self) -> Self {
        self.ratchet = true;
        self
    }

    pub fn with_license_authority(mut self, id: impl Into<Identity>) -> Self {
        self.license_authorities.push(id.into());
        self
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.approvers.is_empty() {
            return Err(PolicyError::NoApprovers);
        }
        let mut seen = BTreeSet::new();
        for a in &self.approvers {
            if !seen.insert(a) {
                return Err(PolicyError::DuplicateApprover(a.clone()));
            }
        }
        if let UpdateRule::Threshold { k, n } = self.update_rule {
            if k == 0 || k > n || n != self.approvers.len() {
                return Err(PolicyError::BadThreshold {
                    k,
                    n,
                    approvers: self.approvers.len(),
                });
            }
        }
        if !self.extension_fraction.is_valid() {
            return Err(PolicyError::BadFraction {
                num: self.extension_fraction.num,
                den: self.extension_fraction.den,
            });
        }
        if let Some(b) = &self.baseline {
            if !b.grants.iter().all(|g| g.is_well_formed()) {
                return Err(PolicyError::MalformedBaseline);
            }
        }
        Ok(())
    }

    /// Distinct approver signatures an extension needs.
    pub fn extension_quorum(&self) -> usize {
        self.extension_fraction.ceil_of(self.approvers.len())
    }

    pub fn is_license_authority(&self, id: &Identity) -> bool {
        self.license_authorities.contains(id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    /// First policy approver (in policy order) without a valid signature.
    MissingApprover(Identity),
    Shortfall { valid: usize, required: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Approval {
    Accept,
    Reject(RejectReason),
}

impl Approval {
    pub fn is_accept(&self) -> bool {
        matches!(self, Approval::Accept)
    }
}

/// Checks an update's signatures against the policy's approval rule.
/// Invalid signatures and signatures from outsiders are ignored.
pub fn verify_update_approval(update: &FirmwareUpdate, policy: &ApproverPolicy) -> Approval {
    let bytes = update.canonical_bytes();
    match policy.update_rule {
        UpdateRule::AllApprovers => {
            for id in &policy.approvers {
                let ok = update
                    .signatures
                    .get(id)
                    .is_some_and(|sig| verify_payload(id, &bytes, sig));
                if !ok {
                    return Approval::Reject(RejectReason::MissingApprover(id.clone()));
                }
            }
            Approval::Accept
        }
        UpdateRule::Threshold { k, .. } => {
            let valid = count_valid(&update.signatures, &bytes, &policy.approvers);
            if valid >= k {
                Approval::Accept
            } else {
                Approval::Reject(RejectReason::Shortfall { valid, required: k })
            }
        }
    }
}

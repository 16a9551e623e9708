//! Rulesets, capability grants and the permissiveness order between them.

use std::borrow::Cow;
use std::fmt;

use schemars::{JsonSchema, Schema, SchemaGenerator, json_schema};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::encoding::{CanonicalEncode, Encoder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadClass {
    Training,
    FineTuning,
    Inference,
    #[serde(rename = "non_ai")]
    NonAi,
}

impl WorkloadClass {
    pub const ALL: [WorkloadClass; 4] = [
        WorkloadClass::Training,
        WorkloadClass::FineTuning,
        WorkloadClass::Inference,
        WorkloadClass::NonAi,
    ];

    pub fn tag(self) -> u8 {
        match self {
            WorkloadClass::Training => 0,
            WorkloadClass::FineTuning => 1,
            WorkloadClass::Inference => 2,
            WorkloadClass::NonAi => 3,
        }
    }
}

/// An upper bound that may be absent. `Unbounded` dominates every bound.
///
/// Serialized as a JSON number or the string `"unbounded"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Limit<T> {
    Bounded(T),
    Unbounded,
}

impl<T: PartialOrd + Copy> Limit<T> {
    pub fn permits(&self, value: T) -> bool {
        match self {
            Limit::Bounded(max) => value <= *max,
            Limit::Unbounded => true,
        }
    }

    /// True iff `self` is at least as permissive as `other`.
    pub fn dominates(&self, other: &Limit<T>) -> bool {
        match (self, other) {
            (Limit::Unbounded, _) => true,
            (Limit::Bounded(_), Limit::Unbounded) => false,
            (Limit::Bounded(a), Limit::Bounded(b)) => a >= b,
        }
    }
}

impl<T: fmt::Display> fmt::Display for Limit<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Limit::Bounded(v) => write!(f, "{v}"),
            Limit::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl<T: Serialize> Serialize for Limit<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Limit::Bounded(v) => v.serialize(s),
            Limit::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Limit<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Value(T),
            Word(String),
        }
        match Raw::<T>::deserialize(d)? {
            Raw::Value(v) => Ok(Limit::Bounded(v)),
            Raw::Word(w) if w == "unbounded" => Ok(Limit::Unbounded),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "expected a number or \"unbounded\", got {w:?}"
            ))),
        }
    }
}

impl<T: JsonSchema> JsonSchema for Limit<T> {
    fn schema_name() -> Cow<'static, str> {
        format!("Limit_{}", T::schema_name()).into()
    }

    fn json_schema(generator: &mut SchemaGenerator) -> Schema {
        let inner = generator.subschema_for::<T>();
        json_schema!({
            "oneOf": [inner, { "const": "unbounded" }]
        })
    }
}

trait EncodeLimit {
    fn encode_limit(&self, enc: &mut Encoder);
}

impl EncodeLimit for Limit<f64> {
    fn encode_limit(&self, enc: &mut Encoder) {
        match self {
            Limit::Bounded(v) => enc.u8(0).f64(*v),
            Limit::Unbounded => enc.u8(1),
        };
    }
}

impl EncodeLimit for Limit<u64> {
    fn encode_limit(&self, enc: &mut Encoder) {
        match self {
            Limit::Bounded(v) => enc.u8(0).u64(*v),
            Limit::Unbounded => enc.u8(1),
        };
    }
}

/// Permission to run one class of workload within resource limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CapabilityGrant {
    pub workload_class: WorkloadClass,
    /// Total floating-point operations.
    pub flop_limit: Limit<f64>,
    /// Devices in the cluster.
    pub cluster_size_limit: Limit<u64>,
    /// Interconnect bandwidth in bits per second.
    pub bandwidth_limit: Limit<f64>,
    #[serde(default)]
    pub irrevocable: bool,
}

impl CapabilityGrant {
    pub fn unbounded(class: WorkloadClass) -> Self {
        CapabilityGrant {
            workload_class: class,
            flop_limit: Limit::Unbounded,
            cluster_size_limit: Limit::Unbounded,
            bandwidth_limit: Limit::Unbounded,
            irrevocable: false,
        }
    }

    pub fn with_flop_limit(mut self, flop: f64) -> Self {
        self.flop_limit = Limit::Bounded(flop);
        self
    }

    pub fn with_cluster_limit(mut self, devices: u64) -> Self {
        self.cluster_size_limit = Limit::Bounded(devices);
        self
    }

    pub fn with_bandwidth_limit(mut self, bits_per_second: f64) -> Self {
        self.bandwidth_limit = Limit::Bounded(bits_per_second);
        self
    }

    pub fn irrevocable(mut self) -> Self {
        self.irrevocable = true;
        self
    }

    /// Real-valued limits must be finite and non-negative.
    pub fn is_well_formed(&self) -> bool {
        let ok = |l: &Limit<f64>| match l {
            Limit::Bounded(v) => v.is_finite() && *v >= 0.0,
            Limit::Unbounded => true,
        };
        ok(&self.flop_limit) && ok(&self.bandwidth_limit)
    }

    /// Same class, every limit at least as large, irrevocability kept.
    pub fn dominates(&self, other: &CapabilityGrant) -> bool {
        self.workload_class == other.workload_class
            && self.flop_limit.dominates(&other.flop_limit)
            && self.cluster_size_limit.dominates(&other.cluster_size_limit)
            && self.bandwidth_limit.dominates(&other.bandwidth_limit)
            && (self.irrevocable || !other.irrevocable)
    }

    /// First limit the workload breaks, if any. The flop limit is skipped
    /// when `flop_waived` is set.
    pub(crate) fn first_violation(
        &self,
        w: &WorkloadDescriptor,
        flop_waived: bool,
    ) -> Option<DenyReason> {
        if self.workload_class != w.workload_class {
            return Some(DenyReason::NoMatchingGrant);
        }
        if !flop_waived && !self.flop_limit.permits(w.total_flop) {
            return Some(DenyReason::FlopLimitExceeded);
        }
        if !self.cluster_size_limit.permits(w.cluster_size) {
            return Some(DenyReason::ClusterTooLarge);
        }
        if !self.bandwidth_limit.permits(w.bandwidth) {
            return Some(DenyReason::BandwidthTooHigh);
        }
        None
    }
}

impl CanonicalEncode for CapabilityGrant {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.u8(self.workload_class.tag());
        self.flop_limit.encode_limit(enc);
        self.cluster_size_limit.encode_limit(enc);
        self.bandwidth_limit.encode_limit(enc);
        enc.bool(self.irrevocable);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Ruleset {
    pub ruleset_id: String,
    pub grants: Vec<CapabilityGrant>,
    #[serde(default)]
    pub requires_license: bool,
}

impl Ruleset {
    pub fn new(id: impl Into<String>, grants: Vec<CapabilityGrant>) -> Self {
        Ruleset {
            ruleset_id: id.into(),
            grants,
            requires_license: false,
        }
    }

    pub fn requiring_license(mut self) -> Self {
        self.requires_license = true;
        self
    }

    /// Small-scale fallback: unbounded non-AI compute plus inference on at
    /// most 8 devices with at most 1e11 bit/s of interconnect.
    pub fn default_baseline() -> Self {
        Ruleset::new(
            "baseline",
            vec![
                CapabilityGrant::unbounded(WorkloadClass::NonAi),
                CapabilityGrant::unbounded(WorkloadClass::Inference)
                    .with_cluster_limit(8)
                    .with_bandwidth_limit(1e11),
            ],
        )
    }

    pub fn irrevocable_grants(&self) -> impl Iterator<Item = &CapabilityGrant> {
        self.grants.iter().filter(|g| g.irrevocable)
    }
}

impl CanonicalEncode for Ruleset {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.str(&self.ruleset_id)
            .list(&self.grants)
            .bool(self.requires_license);
    }
}

/// True iff `new` is at least as permissive as `old`: every old grant is
/// dominated by some new grant.
pub fn check_ratchet(old: &Ruleset, new: &Ruleset) -> bool {
    old.grants
        .iter()
        .all(|g| new.grants.iter().any(|h| h.dominates(g)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct WorkloadDescriptor {
    pub workload_class: WorkloadClass,
    pub total_flop: f64,
    pub cluster_size: u64,
    /// Bits per second.
    pub bandwidth: f64,
    /// Set for workloads that received specific approval.
    #[serde(default)]
    pub authorized: bool,
}

impl WorkloadDescriptor {
    pub fn new(class: WorkloadClass, total_flop: f64, cluster_size: u64, bandwidth: f64) -> Self {
        WorkloadDescriptor {
            workload_class: class,
            total_flop,
            cluster_size,
            bandwidth,
            authorized: false,
        }
    }

    pub fn authorized(mut self) -> Self {
        self.authorized = true;
        self
    }

    pub fn is_well_formed(&self) -> bool {
        self.total_flop.is_finite()
            && self.total_flop >= 0.0
            && self.bandwidth.is_finite()
            && self.bandwidth >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
pub enum DenyReason {
    LockedDown,
    NoMatchingGrant,
    FlopLimitExceeded,
    ClusterTooLarge,
    BandwidthTooHigh,
    LicenseMissingOrExpired,
    InvalidWorkload,
}

impl fmt::Display for DenyReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DenyReason::LockedDown => "LockedDown",
            DenyReason::NoMatchingGrant => "NoMatchingGrant",
            DenyReason::FlopLimitExceeded => "FlopLimitExceeded",
            DenyReason::ClusterTooLarge => "ClusterTooLarge",
            DenyReason::BandwidthTooHigh => "BandwidthTooHigh",
            DenyReason::LicenseMissingOrExpired => "LicenseMissingOrExpired",
            DenyReason::InvalidWorkload => "InvalidWorkload",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Allow,
    Deny(DenyReason),
}

impl Verdict {
    pub fn is_allow(&self) -> bool {
        matches!(self, Verdict::Allow)
    }
}

/// Evaluates a workload against a grant set. Grants only match workloads
/// of their own class. When nothing fits, the reason comes from the first
/// grant of the workload's class.
pub(crate) fn evaluate_grants(
    grants: &[CapabilityGrant],
    w: &WorkloadDescriptor,
    flop_waiver: bool,
) -> Verdict {
    let waived = flop_waiver && w.authorized && w.workload_class == WorkloadClass::Training;
    let mut first_reason = None;
    for g in grants.iter().filter(|g| g.workload_class == w.workload_class) {
        match g.first_violation(w, waived) {
            None => return Verdict::Allow,
            Some(r) => {
                first_reason.get_or_insert(r);
            }
        }
    }
    Verdict::Deny(first_reason.unwrap_or(DenyReason::NoMatchingGrant))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(class: WorkloadClass) -> CapabilityGrant {
        CapabilityGrant::unbounded(class)
    }

    #[test]
    fn unbounded_dominates_bounded() {
        let a: Limit<u64> = Limit::Unbounded;
        assert!(a.dominates(&Limit::Bounded(u64::MAX)));
        assert!(!Limit::Bounded(u64::MAX).dominates(&a));
    }

    #[test]
    fn ratchet_reflexive() {
        let r = Ruleset::default_baseline();
        assert!(check_ratchet(&r, &r));
    }

    #[test]
    fn ratchet_add_and_remove() {
        let old = Ruleset::new("a", vec![g(WorkloadClass::Inference).with_flop_limit(1e20)]);
        let mut added = old.clone();
        added.grants.push(g(WorkloadClass::NonAi));
        assert!(check_ratchet(&old, &added));
        assert!(!check_ratchet(&added, &old));
    }

    #[test]
    fn ratchet_requires_irrevocability_kept() {
        let old = Ruleset::new("a", vec![g(WorkloadClass::Training).irrevocable()]);
        let new = Ruleset::new("b", vec![g(WorkloadClass::Training)]);
        assert!(!check_ratchet(&old, &new));
    }

    #[test]
    fn limit_json_forms() {
        let l: Limit<f64> = serde_json::from_str("\"unbounded\"").unwrap();
        assert_eq!(l, Limit::Unbounded);
        let l: Limit<f64> = serde_json::from_str("1e24").unwrap();
        assert_eq!(l, Limit::Bounded(1e24));
        assert!(serde_json::from_str::<Limit<f64>>("\"infinite\"").is_err());
        assert_eq!(serde_json::to_string(&Limit::<u64>::Unbounded).unwrap(), "\"unbounded\"");
    }

    #[test]
    fn authorization_waives_only_training_flops() {
        let grants = vec![g(WorkloadClass::Training).with_flop_limit(1e24).with_cluster_limit(10)];
        let big = WorkloadDescriptor::new(WorkloadClass::Training, 2e24, 4, 0.0);
        assert_eq!(
            evaluate_grants(&grants, &big, true),
            Verdict::Deny(DenyReason::FlopLimitExceeded)
        );
        assert_eq!(evaluate_grants(&grants, &big.clone().authorized(), true), Verdict::Allow);
        // other limits still bind
        let mut wide = big.authorized();
        wide.cluster_size = 11;
        assert_eq!(
            evaluate_grants(&grants, &wide, true),
            Verdict::Deny(DenyReason::ClusterTooLarge)
        );
    }

    #[test]
    fn non_ai_grant_is_not_a_wildcard() {
        let grants = vec![g(WorkloadClass::NonAi)];
        let w = WorkloadDescriptor::new(WorkloadClass::Training, 1.0, 1, 0.0);
        assert_eq!(
            evaluate_grants(&grants, &w, false),
            Verdict::Deny(DenyReason::NoMatchingGrant)
        );
    }
}

//! Registry of inspectable entities and their status machine.

use std::collections::BTreeSet;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::oversight::OversightError;
use crate::signature::Identity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
pub enum EntityKind {
    FlexHegDevice,
    NonFlexHegChip,
    DataCenter,
    FabFacility,
    ManufacturingEquipment,
}

impl EntityKind {
    pub const ALL: [EntityKind; 5] = [
        EntityKind::FlexHegDevice,
        EntityKind::NonFlexHegChip,
        EntityKind::DataCenter,
        EntityKind::FabFacility,
        EntityKind::ManufacturingEquipment,
    ];

    /// What an on-site inspection of this kind of entity is for.
    pub fn inspection_goal(self) -> &'static str {
        match self {
            EntityKind::FlexHegDevice => {
                "confirm the registered owner holds the device and it shows no tampering"
            }
            EntityKind::NonFlexHegChip => {
                "confirm the registered owner holds the chip and it is not in an unregistered cluster"
            }
            EntityKind::DataCenter => "look for unregistered AI-capable clusters on site",
            EntityKind::FabFacility => "check production lines make no unregistered AI chips",
            EntityKind::ManufacturingEquipment => {
                "check the tool sits at its registered facility and production line"
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
pub enum EntityStatus {
    Present,
    Missing,
    TamperSuspected,
    Destroyed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct EntityRecord {
    pub entity_id: Identity,
    pub kind: EntityKind,
    pub registered_owner: String,
    pub registered_location: String,
    #[serde(default = "present")]
    pub status: EntityStatus,
}

fn present() -> EntityStatus {
    EntityStatus::Present
}

impl EntityRecord {
    pub fn new(id: impl Into<Identity>, kind: EntityKind, owner: &str, location: &str) -> Self {
        EntityRecord {
            entity_id: id.into(),
            kind,
            registered_owner: owner.into(),
            registered_location: location.into(),
            status: EntityStatus::Present,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Registry {
    records: Vec<EntityRecord>,
}

impl Registry {
    pub fn new(records: Vec<EntityRecord>) -> Result<Self, OversightError> {
        let mut seen = BTreeSet::new();
        for r in &records {
            if !seen.insert(&r.entity_id) {
                return Err(OversightError::DuplicateEntity(r.entity_id.clone()));
            }
        }
        Ok(Registry { records })
    }

    pub fn from_json(text: &str) -> Result<Self, OversightError> {
        let records: Vec<EntityRecord> =
            serde_json::from_str(text).map_err(|e| OversightError::Import(e.to_string()))?;
        Registry::new(records)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.records).expect("registry serializes")
    }

    pub fn records(&self) -> &[EntityRecord] {
        &self.records
    }

    pub fn get(&self, id: &Identity) -> Option<&EntityRecord> {
        self.records.iter().find(|r| &r.entity_id == id)
    }

    /// Manual status change. `Destroyed` is terminal, and a `Missing`
    /// entity only returns to `Present` by answering an inspection round.
    pub fn set_status(&mut self, id: &Identity, to: EntityStatus) -> Result<(), OversightError> {
        let rec = self
            .records
            .iter_mut()
            .find(|r| &r.entity_id == id)
            .ok_or_else(|| OversightError::UnknownEntity(id.clone()))?;
        let from = rec.status;
        let legal = match (from, to) {
            (EntityStatus::Destroyed, t) => t == EntityStatus::Destroyed,
            (EntityStatus::Missing, EntityStatus::Present) => false,
            _ => true,
        };
        if !legal {
            return Err(OversightError::IllegalTransition { id: id.clone(), from, to });
        }
        rec.status = to;
        Ok(())
    }

    /// Applies one inspection round. Every registered guarantee device that
    /// did not respond becomes `Missing`; a `Missing` one that did respond
    /// goes back to `Present`. Returns the devices to refer for license
    /// denial, in registry order.
    pub fn flag_missing(&mut self, responses: &BTreeSet<Identity>) -> Vec<Identity> {
        let mut missing = Vec::new();
        for rec in self
            .records
            .iter_mut()
            .filter(|r| r.kind == EntityKind::FlexHegDevice && r.status != EntityStatus::Destroyed)
        {
            if responses.contains(&rec.entity_id) {
                if rec.status == EntityStatus::Missing {
                    rec.status = EntityStatus::Present;
                }
            } else {
                rec.status = EntityStatus::Missing;
                missing.push(rec.entity_id.clone());
            }
        }
        missing
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry() -> Registry {
        Registry::new(vec![
            EntityRecord::new("d1", EntityKind::FlexHegDevice, "acme", "site-a"),
            EntityRecord::new("d2", EntityKind::FlexHegDevice, "acme", "site-a"),
            EntityRecord::new("dc", EntityKind::DataCenter, "acme", "site-a"),
        ])
        .unwrap()
    }

    fn ids(v: &[&str]) -> BTreeSet<Identity> {
        v.iter().map(|s| Identity::new(*s)).collect()
    }

    #[test]
    fn all_respond() {
        assert!(registry().flag_missing(&ids(&["d1", "d2"])).is_empty());
    }

    #[test]
    fn silent_device_is_flagged_then_restored() {
        let mut r = registry();
        assert_eq!(r.flag_missing(&ids(&["d1"])), vec![Identity::new("d2")]);
        assert_eq!(r.get(&"d2".into()).unwrap().status, EntityStatus::Missing);
        // the data center never answers but is not a device
        assert_eq!(r.get(&"dc".into()).unwrap().status, EntityStatus::Present);
        assert!(r.flag_missing(&ids(&["d1", "d2"])).is_empty());
        assert_eq!(r.get(&"d2".into()).unwrap().status, EntityStatus::Present);
    }

    #[test]
    fn destroyed_is_terminal() {
        let mut r = registry();
        r.set_status(&"d1".into(), EntityStatus::Destroyed).unwrap();
        assert!(r.set_status(&"d1".into(), EntityStatus::Present).is_err());
        assert!(r.flag_missing(&ids(&["d2"])).is_empty());
        assert_eq!(r.get(&"d1".into()).unwrap().status, EntityStatus::Destroyed);
    }

    #[test]
    fn missing_needs_a_response_to_return() {
        let mut r = registry();
        r.flag_missing(&ids(&["d1"]));
        assert!(matches!(
            r.set_status(&"d2".into(), EntityStatus::Present),
            Err(OversightError::IllegalTransition { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let r = registry();
        assert_eq!(Registry::from_json(&r.to_json()).unwrap(), r);
        assert!(Registry::from_json(r#"[{"entity_id":"x","kind":"Nope","registered_owner":"","registered_location":""}]"#).is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let rec = EntityRecord::new("d1", EntityKind::FlexHegDevice, "a", "b");
        assert!(Registry::new(vec![rec.clone(), rec]).is_err());
    }
}

//! Machine-readable event schemas.
//!
//! A schema is stored as one JSON document. Steps live in a flat list and
//! carry an `@type` naming an ontology event type; all temporal structure
//! is expressed by the `order` constraints. Reusing one participant id in
//! several fillers marks those fillers as coreferent.

mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::Ontology;

pub use validate::{
    infer_participant_types, validate_schema, Issue, Severity, TypeInference, ValidationReport,
};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Participant {
    pub id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub coarse_types: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub fine_types: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub id: String,
    #[serde(rename = "@type")]
    pub event_type: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub fillers: BTreeMap<String, Vec<String>>,
}

impl Step {
    /// Distinct participant ids filling this step, in role-name order.
    pub fn participant_ids(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.fillers
            .values()
            .flatten()
            .map(String::as_str)
            .filter(|p| seen.insert(*p))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationInstance {
    #[serde(rename = "@type")]
    pub relation_type: String,
    pub subject: String,
    pub object: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingKind {
    Linear,
    UnorderedGroup,
    ExclusiveGroup,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderingConstraint {
    pub kind: OrderingKind,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    Manual,
    SkeletonFleshed {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        skeleton_id: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub steps: Vec<Step>,
    #[serde(default)]
    pub participants: Vec<Participant>,
    #[serde(default)]
    pub relations: Vec<RelationInstance>,
    #[serde(rename = "order", default)]
    pub orderings: Vec<OrderingConstraint>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl Schema {
    pub fn step(&self, id: &str) -> Option<&Step> {
        self.steps.iter().find(|s| s.id == id)
    }

    pub fn participant(&self, id: &str) -> Option<&Participant> {
        self.participants.iter().find(|p| p.id == id)
    }

    /// Event types of the steps, one entry per step.
    pub fn event_types(&self) -> impl Iterator<Item = &str> {
        self.steps.iter().map(|s| s.event_type.as_str())
    }

    pub fn event_type_set(&self) -> BTreeSet<&str> {
        self.event_types().collect()
    }

    /// Canonical JSON: fixed field order, sorted maps, two-space indent,
    /// trailing newline.
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("schema serializes");
        out.push(b'\n');
        out
    }

    pub fn from_json(source: &[u8]) -> Result<Self> {
        serde_json::from_slice(source).map_err(|e| Error::parse("schema document", e))
    }
}

pub fn serialize(schema: &Schema) -> Vec<u8> {
    schema.to_json()
}

pub fn deserialize(source: &[u8]) -> Result<Schema> {
    Schema::from_json(source)
}

/// Argumentless event sequence produced by the skeleton builder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonSchema {
    pub id: String,
    pub score: f64,
    pub events: Vec<String>,
}

/// Imports a skeleton as a schema in which only the steps are filled in.
pub fn schema_from_skeleton(skeleton: &SkeletonSchema, ontology: &Ontology) -> Result<Schema> {
    if skeleton.events.len() < 2 {
        return Err(Error::Precondition(format!(
            "skeleton `{}` has {} event(s); at least 2 are required",
            skeleton.id,
            skeleton.events.len()
        )));
    }
    if let Some(missing) = skeleton.events.iter().find(|e| !ontology.has_event_type(e)) {
        return Err(Error::UnknownEventType(missing.clone()));
    }
    let steps: Vec<Step> = skeleton
        .events
        .iter()
        .enumerate()
        .map(|(i, event_type)| Step {
            id: format!("step-{}", i + 1),
            event_type: event_type.clone(),
            description: String::new(),
            fillers: BTreeMap::new(),
        })
        .collect();
    let order = vec![OrderingConstraint {
        kind: OrderingKind::Linear,
        members: steps.iter().map(|s| s.id.clone()).collect(),
    }];
    Ok(Schema {
        id: skeleton.id.clone(),
        name: skeleton.id.clone(),
        description: String::new(),
        steps,
        participants: Vec::new(),
        relations: Vec::new(),
        orderings: order,
        provenance: Provenance::SkeletonFleshed {
            skeleton_id: Some(skeleton.id.clone()),
        },
    })
}

/// Reads skeletons from a JSON-lines file.
pub fn read_skeletons(source: &str) -> Result<Vec<SkeletonSchema>> {
    source
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| Error::format("skeleton file", i + 1, e.to_string()))
        })
        .collect()
}

pub fn write_skeletons(skeletons: &[SkeletonSchema]) -> String {
    let mut out = String::new();
    for s in skeletons {
        out.push_str(&serde_json::to_string(s).expect("skeleton serializes"));
        out.push('\n');
    }
    out
}

/// Loads every `*.json` schema in `dir`, sorted by schema id. Dot-files are
/// skipped so a store manifest can live alongside the schemas.
pub fn load_library(dir: &Path) -> Result<Vec<Schema>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut schemas = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_json = path.extension().is_some_and(|x| x == "json");
        let hidden = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with('.'));
        if !is_json || hidden {
            continue;
        }
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        schemas.push(Schema::from_json(&bytes)?);
    }
    schemas.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(schemas)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Schema {
        Schema {
            id: "s".into(),
            name: "S".into(),
            description: "d".into(),
            steps: vec![Step {
                id: "a".into(),
                event_type: "Life.Die.Unspecified".into(),
                description: "Victim dies".into(),
                fillers: BTreeMap::from([("Victim".into(), vec!["v".into()])]),
            }],
            participants: vec![Participant {
                id: "v".into(),
                name: "Victim".into(),
                coarse_types: BTreeSet::from(["per".into()]),
                fine_types: BTreeSet::new(),
            }],
            relations: vec![],
            orderings: vec![],
            provenance: Provenance::Manual,
        }
    }

    #[test]
    fn round_trip_is_canonical() {
        let s = tiny();
        let bytes = s.to_json();
        let back = Schema::from_json(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_json(), bytes);
    }

    #[test]
    fn missing_name_is_a_parse_error() {
        let mut value: serde_json::Value = serde_json::from_slice(&tiny().to_json()).unwrap();
        value.as_object_mut().unwrap().remove("name");
        let err = Schema::from_json(value.to_string().as_bytes()).unwrap_err();
        assert!(err.to_string().contains("name"), "{err}");
    }

    #[test]
    fn parse_error_carries_location() {
        let err = Schema::from_json(b"{\n  \"id\": \"x\",\n  \"name\": 3\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn provenance_encoding() {
        let p = Provenance::SkeletonFleshed {
            skeleton_id: Some("sk-1".into()),
        };
        assert_eq!(
            serde_json::to_string(&p).unwrap(),
            r#"{"kind":"skeleton_fleshed","skeleton_id":"sk-1"}"#
        );
        assert_eq!(
            serde_json::to_string(&Provenance::Manual).unwrap(),
            r#"{"kind":"manual"}"#
        );
    }

    #[test]
    fn skeleton_lines_round_trip() {
        let sk = vec![SkeletonSchema {
            id: "sk-1".into(),
            score: 0.5,
            events: vec!["A".into(), "B".into()],
        }];
        assert_eq!(read_skeletons(&write_skeletons(&sk)).unwrap(), sk);
        assert!(read_skeletons("{\"id\": 1}\n").is_err());
    }
}

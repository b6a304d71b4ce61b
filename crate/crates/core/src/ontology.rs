//! The event / entity / relation type ontology.
//!
//! An [`Ontology`] is loaded once from a JSON document, cross-checked, and
//! then shared read-only by every other module. Event types hang off a
//! category hierarchy given by their `category` path; categories are
//! identified by their dotted path (`Medical`, `Contact.Contact`), so the
//! hierarchy is a tree by construction.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Ontology document format understood by [`load_ontology`].
pub const ONTOLOGY_FORMAT_VERSION: u32 = 1;

/// Category id that selects every event type.
pub const ROOT_CATEGORY: &str = "root";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityTypeDef {
    pub id: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

/// Upper bound on the number of fillers of a role slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub enum MaxFillers {
    Bounded(u32),
    #[default]
    Unbounded,
}

impl MaxFillers {
    pub fn admits(self, count: usize) -> bool {
        match self {
            MaxFillers::Bounded(max) => count <= max as usize,
            MaxFillers::Unbounded => true,
        }
    }
}

impl fmt::Display for MaxFillers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaxFillers::Bounded(n) => write!(f, "{n}"),
            MaxFillers::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl Serialize for MaxFillers {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MaxFillers::Bounded(n) => serializer.serialize_u32(*n),
            MaxFillers::Unbounded => serializer.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for MaxFillers {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct MaxVisitor;

        impl Visitor<'_> for MaxVisitor {
            type Value = MaxFillers;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative integer or \"unbounded\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<MaxFillers, E> {
                u32::try_from(v)
                    .map(MaxFillers::Bounded)
                    .map_err(|_| E::custom("max fillers out of range"))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<MaxFillers, E> {
                u32::try_from(v)
                    .map(MaxFillers::Bounded)
                    .map_err(|_| E::custom("max fillers must be non-negative"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<MaxFillers, E> {
                if v == "unbounded" {
                    Ok(MaxFillers::Unbounded)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }

        deserializer.deserialize_any(MaxVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleSlot {
    pub name: String,
    #[serde(rename = "types")]
    pub allowed_entity_types: BTreeSet<String>,
    #[serde(rename = "min", default)]
    pub min_fillers: u32,
    #[serde(rename = "max", default)]
    pub max_fillers: MaxFillers,
}

impl RoleSlot {
    pub fn admits_count(&self, count: usize) -> bool {
        count >= self.min_fillers as usize && self.max_fillers.admits(count)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTypeDef {
    pub id: String,
    #[serde(rename = "category")]
    pub category_path: Vec<String>,
    pub label: String,
    #[serde(default)]
    pub roles: Vec<RoleSlot>,
}

impl EventTypeDef {
    pub fn role(&self, name: &str) -> Option<&RoleSlot> {
        self.roles.iter().find(|r| r.name == name)
    }

    /// Dotted id of the leaf category this event type belongs to.
    pub fn category_id(&self) -> String {
        self.category_path.join(".")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationTypeDef {
    pub id: String,
    pub label: String,
    pub subject_types: BTreeSet<String>,
    pub object_types: BTreeSet<String>,
}

/// On-disk shape of an ontology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OntologyDocument {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub events: Vec<EventTypeDef>,
    pub entities: Vec<EntityTypeDef>,
    #[serde(default)]
    pub relations: Vec<RelationTypeDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Category {
    pub id: String,
    pub name: String,
    pub children: Vec<String>,
    /// Event types attached directly to this category, in definition order.
    pub members: Vec<usize>,
}

/// Category hierarchy keyed by dotted path.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CategoryTree {
    nodes: BTreeMap<String, Category>,
    top_level: Vec<String>,
}

impl CategoryTree {
    fn build(events: &[EventTypeDef]) -> Self {
        let mut tree = CategoryTree::default();
        for (idx, event) in events.iter().enumerate() {
            let mut parent: Option<String> = None;
            for depth in 0..event.category_path.len() {
                let id = event.category_path[..=depth].join(".");
                if !tree.nodes.contains_key(&id) {
                    tree.nodes.insert(
                        id.clone(),
                        Category {
                            id: id.clone(),
                            name: event.category_path[depth].clone(),
                            ..Category::default()
                        },
                    );
                    match &parent {
                        Some(p) => tree.nodes.get_mut(p).unwrap().children.push(id.clone()),
                        None => tree.top_level.push(id.clone()),
                    }
                }
                parent = Some(id);
            }
            if let Some(leaf) = parent {
                tree.nodes.get_mut(&leaf).unwrap().members.push(idx);
            }
        }
        tree
    }

    pub fn get(&self, id: &str) -> Option<&Category> {
        self.nodes.get(id)
    }

    pub fn top_level(&self) -> impl Iterator<Item = &Category> {
        self.top_level.iter().map(|id| &self.nodes[id])
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Category> {
        self.nodes.values()
    }
}

#[derive(Debug, Clone)]
pub struct Ontology {
    pub name: Option<String>,
    pub event_types: Vec<EventTypeDef>,
    pub entity_types: Vec<EntityTypeDef>,
    pub relation_types: Vec<RelationTypeDef>,
    pub category_tree: CategoryTree,
    event_index: HashMap<String, usize>,
    entity_index: HashMap<String, usize>,
    relation_index: HashMap<String, usize>,
}

impl PartialEq for Ontology {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.event_types == other.event_types
            && self.entity_types == other.entity_types
            && self.relation_types == other.relation_types
    }
}

/// Parses and cross-checks an ontology document.
///
/// Validation collects every problem it finds rather than stopping at the
/// first one, so a broken fixture can be fixed in one pass.
pub fn load_ontology(source: &[u8]) -> Result<Ontology> {
    let doc: OntologyDocument =
        serde_json::from_slice(source).map_err(|e| Error::parse("ontology document", e))?;
    Ontology::from_document(doc)
}

impl Ontology {
    pub fn from_document(doc: OntologyDocument) -> Result<Self> {
        let issues = check_document(&doc);
        if !issues.is_empty() {
            return Err(Error::InvalidOntology(issues));
        }
        let index = |ids: Vec<&String>| -> HashMap<String, usize> {
            ids.into_iter()
                .enumerate()
                .map(|(i, id)| (id.clone(), i))
                .collect()
        };
        let event_index = index(doc.events.iter().map(|e| &e.id).collect());
        let entity_index = index(doc.entities.iter().map(|e| &e.id).collect());
        let relation_index = index(doc.relations.iter().map(|r| &r.id).collect());
        let category_tree = CategoryTree::build(&doc.events);
        Ok(Ontology {
            name: doc.name,
            event_types: doc.events,
            entity_types: doc.entities,
            relation_types: doc.relations,
            category_tree,
            event_index,
            entity_index,
            relation_index,
        })
    }

    pub fn to_document(&self) -> OntologyDocument {
        OntologyDocument {
            format_version: ONTOLOGY_FORMAT_VERSION,
            name: self.name.clone(),
            events: self.event_types.clone(),
            entities: self.entity_types.clone(),
            relations: self.relation_types.clone(),
        }
    }

    pub fn event_type(&self, id: &str) -> Option<&EventTypeDef> {
        self.event_index.get(id).map(|&i| &self.event_types[i])
    }

    pub fn entity_type(&self, id: &str) -> Option<&EntityTypeDef> {
        self.entity_index.get(id).map(|&i| &self.entity_types[i])
    }

    pub fn relation_type(&self, id: &str) -> Option<&RelationTypeDef> {
        self.relation_index
            .get(id)
            .map(|&i| &self.relation_types[i])
    }

    pub fn has_event_type(&self, id: &str) -> bool {
        self.event_index.contains_key(id)
    }

    pub fn event_type_ids(&self) -> impl Iterator<Item = &str> {
        self.event_types.iter().map(|e| e.id.as_str())
    }

    /// Event types under `category`, in definition order.
    ///
    /// `category` is either [`ROOT_CATEGORY`], a dotted category path
    /// (`Contact.Contact`), or a single category name, which matches every
    /// event whose path contains that name.
    pub fn event_types_in_category(&self, category: &str) -> Result<Vec<&EventTypeDef>> {
        if category == ROOT_CATEGORY {
            return Ok(self.event_types.iter().collect());
        }
        let segments: Vec<&str> = category.split('.').collect();
        let selected: Vec<&EventTypeDef> = if segments.len() > 1 {
            if self.category_tree.get(category).is_none() {
                return Err(Error::UnknownCategory(category.to_string()));
            }
            self.event_types
                .iter()
                .filter(|e| {
                    e.category_path.len() >= segments.len()
                        && e.category_path.iter().zip(&segments).all(|(a, b)| a == b)
                })
                .collect()
        } else {
            self.event_types
                .iter()
                .filter(|e| e.category_path.iter().any(|c| c == category))
                .collect()
        };
        if selected.is_empty() {
            return Err(Error::UnknownCategory(category.to_string()));
        }
        Ok(selected)
    }
}

fn check_document(doc: &OntologyDocument) -> Vec<String> {
    let mut issues = Vec::new();
    if doc.format_version != ONTOLOGY_FORMAT_VERSION {
        issues.push(format!(
            "unsupported format_version {} (expected {})",
            doc.format_version, ONTOLOGY_FORMAT_VERSION
        ));
    }

    let mut entity_ids = BTreeSet::new();
    for entity in &doc.entities {
        if entity.id.is_empty() {
            issues.push("entity type with empty id".to_string());
        } else if !entity_ids.insert(entity.id.as_str()) {
            issues.push(format!("duplicate entity type id `{}`", entity.id));
        }
    }

    let mut event_ids = BTreeSet::new();
    for event in &doc.events {
        if event.id.is_empty() {
            issues.push("event type with empty id".to_string());
        } else if !event_ids.insert(event.id.as_str()) {
            issues.push(format!("duplicate event type id `{}`", event.id));
        }
        if event.category_path.is_empty() {
            issues.push(format!(
                "event type `{}` has an empty category path",
                event.id
            ));
        }
        if event
            .category_path
            .iter()
            .any(|c| c.is_empty() || c.contains('.'))
        {
            issues.push(format!(
                "event type `{}` has an empty or dotted category segment",
                event.id
            ));
        }
        let mut role_names = BTreeSet::new();
        for role in &event.roles {
            if !role_names.insert(role.name.as_str()) {
                issues.push(format!(
                    "event type `{}` declares role `{}` twice",
                    event.id, role.name
                ));
            }
            if role.allowed_entity_types.is_empty() {
                issues.push(format!(
                    "role `{}.{}` allows no entity types",
                    event.id, role.name
                ));
            }
            for ty in &role.allowed_entity_types {
                if !entity_ids.contains(ty.as_str()) {
                    issues.push(format!(
                        "role `{}.{}` references unknown entity type `{}`",
                        event.id, role.name, ty
                    ));
                }
            }
            if let MaxFillers::Bounded(max) = role.max_fillers {
                if role.min_fillers > max {
                    issues.push(format!(
                        "role `{}.{}` has min fillers {} > max fillers {}",
                        event.id, role.name, role.min_fillers, max
                    ));
                }
            }
        }
    }

    // An event must sit on a leaf category; otherwise it would be reachable
    // both from its own category and from the leaves below it.
    let leaf_paths: BTreeSet<String> = doc
        .events
        .iter()
        .filter(|e| !e.category_path.is_empty())
        .map(|e| e.category_path.join("."))
        .collect();
    for event in &doc.events {
        let own = event.category_path.join(".");
        if own.is_empty() {
            continue;
        }
        let prefix = format!("{own}.");
        if leaf_paths.iter().any(|p| p.starts_with(&prefix)) {
            issues.push(format!(
                "event type `{}` is attached to non-leaf category `{}`",
                event.id, own
            ));
        }
    }
    if doc
        .events
        .iter()
        .any(|e| e.category_path.first().map(String::as_str) == Some(ROOT_CATEGORY))
    {
        issues.push(format!("`{ROOT_CATEGORY}` is reserved as a category name"));
    }

    let mut relation_ids = BTreeSet::new();
    for relation in &doc.relations {
        if relation.id.is_empty() {
            issues.push("relation type with empty id".to_string());
        } else if !relation_ids.insert(relation.id.as_str()) {
            issues.push(format!("duplicate relation type id `{}`", relation.id));
        }
        for (side, types) in [
            ("subject", &relation.subject_types),
            ("object", &relation.object_types),
        ] {
            if types.is_empty() {
                issues.push(format!("relation `{}` has no {side} types", relation.id));
            }
            for ty in types {
                if !entity_ids.contains(ty.as_str()) {
                    issues.push(format!(
                        "relation `{}` {side} references unknown entity type `{}`",
                        relation.id, ty
                    ));
                }
            }
        }
    }
    issues
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "format_version": 1,
        "events": [{"id": "Life.Die.Unspecified", "category": ["Life", "Die"], "label": "Die",
                    "roles": [{"name": "Victim", "types": ["per"]}]}],
        "entities": [{"id": "per", "label": "person"}]
    }"#;

    #[test]
    fn minimal_ontology_loads() {
        let ont = load_ontology(MINIMAL.as_bytes()).unwrap();
        assert_eq!(ont.event_types.len(), 1);
        assert_eq!(ont.entity_types.len(), 1);
        assert_eq!(ont.relation_types.len(), 0);
        let role = &ont.event_types[0].roles[0];
        assert_eq!(role.min_fillers, 0);
        assert_eq!(role.max_fillers, MaxFillers::Unbounded);
    }

    #[test]
    fn dangling_entity_reference_is_named() {
        let src = MINIMAL.replace(r#""types": ["per"]"#, r#""types": ["per2"]"#);
        match load_ontology(src.as_bytes()) {
            Err(Error::InvalidOntology(issues)) => {
                assert_eq!(issues.len(), 1);
                assert!(issues[0].contains("per2"), "{issues:?}");
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn every_issue_is_reported() {
        let src = r#"{
            "format_version": 1,
            "events": [
                {"id": "A", "category": ["X"], "label": "a",
                 "roles": [{"name": "R", "types": ["nope"], "min": 3, "max": 1},
                           {"name": "R", "types": []}]},
                {"id": "A", "category": ["X", "Y"], "label": "dup"}
            ],
            "entities": [{"id": "per", "label": "person"}],
            "relations": [{"id": "Rel", "label": "rel", "subject_types": ["per"], "object_types": ["ghost"]}]
        }"#;
        let Err(Error::InvalidOntology(issues)) = load_ontology(src.as_bytes()) else {
            panic!("expected failure");
        };
        let joined = issues.join("\n");
        for needle in [
            "unknown entity type `nope`",
            "min fillers 3 > max fillers 1",
            "declares role `R` twice",
            "allows no entity types",
            "duplicate event type id `A`",
            "non-leaf category `X`",
            "unknown entity type `ghost`",
        ] {
            assert!(joined.contains(needle), "missing `{needle}` in\n{joined}");
        }
    }

    #[test]
    fn malformed_document_is_a_parse_error() {
        assert!(matches!(
            load_ontology(b"{\"format_version\": 1, \"events\": ["),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn max_fillers_round_trips() {
        let bounded: MaxFillers = serde_json::from_str("2").unwrap();
        assert_eq!(bounded, MaxFillers::Bounded(2));
        let unbounded: MaxFillers = serde_json::from_str("\"unbounded\"").unwrap();
        assert_eq!(unbounded, MaxFillers::Unbounded);
        assert_eq!(serde_json::to_string(&unbounded).unwrap(), "\"unbounded\"");
        assert!(serde_json::from_str::<MaxFillers>("\"many\"").is_err());
    }

    #[test]
    fn categories() {
        let src = r#"{
            "format_version": 1,
            "events": [
                {"id": "M.A", "category": ["M", "A"], "label": "a"},
                {"id": "M.B", "category": ["M", "B"], "label": "b"},
                {"id": "N.C", "category": ["N", "C"], "label": "c"}
            ],
            "entities": []
        }"#;
        let ont = load_ontology(src.as_bytes()).unwrap();
        let ids = |cat: &str| -> Vec<String> {
            ont.event_types_in_category(cat)
                .unwrap()
                .into_iter()
                .map(|e| e.id.clone())
                .collect()
        };
        assert_eq!(ids(ROOT_CATEGORY), ["M.A", "M.B", "N.C"]);
        assert_eq!(ids("M"), ["M.A", "M.B"]);
        assert_eq!(ids("N.C"), ["N.C"]);
        assert!(matches!(
            ont.event_types_in_category("Q"),
            Err(Error::UnknownCategory(_))
        ));
        assert_eq!(ont.category_tree.len(), 5);
        assert_eq!(ont.category_tree.top_level().count(), 2);
    }
}

//! Extracted-event documents and the corpus structures derived from them.

mod document;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::Ontology;

pub use document::{
    load_corpus, parse_corpus_lines, parse_document_graph, write_corpus_lines, DocumentGraph,
    EntityValue, ExtractedEvent, ExtractedParticipant,
};

/// One rewrite rule of a source-to-target event type mapping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingRule {
    pub source: String,
    pub target: String,
    /// Source role name to target role name. Roles not listed keep their
    /// name.
    #[serde(default)]
    pub roles: BTreeMap<String, String>,
}

/// A validated mapping from source event types onto the target ontology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventTypeMapping {
    rules: BTreeMap<String, MappingRule>,
    targets: BTreeSet<String>,
}

impl EventTypeMapping {
    pub fn new(rules: Vec<MappingRule>, ontology: &Ontology) -> Result<Self> {
        let mut issues = Vec::new();
        let mut by_source = BTreeMap::new();
        for rule in rules {
            if !ontology.has_event_type(&rule.target) {
                issues.push(format!(
                    "rule for `{}` targets unknown event type `{}`",
                    rule.source, rule.target
                ));
            }
            if let Some(prev) = by_source.insert(rule.source.clone(), rule) {
                issues.push(format!(
                    "source type `{}` is mapped more than once",
                    prev.source
                ));
            }
        }
        if !issues.is_empty() {
            return Err(Error::InvalidMapping(issues));
        }
        Ok(EventTypeMapping {
            rules: by_source,
            targets: ontology.event_type_ids().map(str::to_string).collect(),
        })
    }

    /// Maps every ontology event type onto itself.
    pub fn identity(ontology: &Ontology) -> Self {
        let rules = ontology
            .event_type_ids()
            .map(|id| MappingRule {
                source: id.to_string(),
                target: id.to_string(),
                roles: BTreeMap::new(),
            })
            .collect();
        Self::new(rules, ontology).expect("identity mapping is valid")
    }

    /// Reads a mapping file: a JSON list of rules.
    pub fn load(source: &[u8], ontology: &Ontology) -> Result<Self> {
        let rules: Vec<MappingRule> =
            serde_json::from_slice(source).map_err(|e| Error::parse("mapping file", e))?;
        Self::new(rules, ontology)
    }

    pub fn rule(&self, source: &str) -> Option<&MappingRule> {
        self.rules.get(source)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappedDocument {
    pub doc: DocumentGraph,
    /// Events dropped because their type has no rule and is not already a
    /// target type.
    pub dropped: usize,
}

/// Rewrites event types (and role names) into the target ontology.
///
/// Events whose type already belongs to the target ontology and has no
/// rule pass through unchanged, which makes the mapping idempotent.
pub fn apply_mapping(doc: &DocumentGraph, mapping: &EventTypeMapping) -> MappedDocument {
    let mut dropped = 0;
    let mut events = Vec::with_capacity(doc.events.len());
    for event in &doc.events {
        match mapping.rule(&event.event_type) {
            Some(rule) => {
                let mut out = event.clone();
                out.event_type = rule.target.clone();
                for p in &mut out.participants {
                    if let Some(renamed) = rule.roles.get(&p.role) {
                        p.role = renamed.clone();
                    }
                }
                events.push(out);
            }
            None if mapping.targets.contains(&event.event_type) => events.push(event.clone()),
            None => dropped += 1,
        }
    }
    MappedDocument {
        doc: DocumentGraph {
            doc_id: doc.doc_id.clone(),
            events,
            entities: doc.entities.clone(),
        },
        dropped,
    }
}

/// Per-type occurrence counts of a document's events.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EventMultiset {
    pub doc_id: String,
    pub counts: BTreeMap<String, usize>,
}

impl EventMultiset {
    pub fn from_types<'a>(doc_id: &str, types: impl IntoIterator<Item = &'a str>) -> Self {
        let mut counts = BTreeMap::new();
        for t in types {
            *counts.entry(t.to_string()).or_insert(0) += 1;
        }
        EventMultiset {
            doc_id: doc_id.to_string(),
            counts,
        }
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

pub fn event_multiset(doc: &DocumentGraph) -> EventMultiset {
    EventMultiset::from_types(
        &doc.doc_id,
        doc.events.iter().map(|e| e.event_type.as_str()),
    )
}

/// Event types of one document sharing a co-referring argument.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Transaction {
    pub doc_id: String,
    pub chain_id: String,
    pub items: BTreeSet<String>,
}

/// One transaction per entity that participates in at least one event.
/// Events without participants contribute to no transaction.
pub fn build_transactions(doc: &DocumentGraph) -> Vec<Transaction> {
    let mut chains: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for event in &doc.events {
        for entity in event.entities() {
            chains
                .entry(entity)
                .or_default()
                .insert(event.event_type.clone());
        }
    }
    chains
        .into_iter()
        .map(|(entity, items)| Transaction {
            doc_id: doc.doc_id.clone(),
            chain_id: entity.to_string(),
            items,
        })
        .collect()
}

/// Tab-separated lines: `doc_id`, `chain_id`, space-separated items.
pub fn write_transactions(transactions: &[Transaction]) -> String {
    let mut out = String::new();
    for t in transactions {
        let items: Vec<&str> = t.items.iter().map(String::as_str).collect();
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            t.doc_id,
            t.chain_id,
            items.join(" ")
        ));
    }
    out
}

pub fn parse_transaction_line(line: &str, line_no: usize) -> Result<Transaction> {
    let mut fields = line.split('\t');
    let (Some(doc_id), Some(chain_id), Some(items), None) =
        (fields.next(), fields.next(), fields.next(), fields.next())
    else {
        return Err(Error::format(
            "transactions file",
            line_no,
            "expected 3 tab-separated fields",
        ));
    };
    let items: BTreeSet<String> = items.split_whitespace().map(str::to_string).collect();
    if items.is_empty() {
        return Err(Error::format(
            "transactions file",
            line_no,
            "empty item list",
        ));
    }
    Ok(Transaction {
        doc_id: doc_id.to_string(),
        chain_id: chain_id.to_string(),
        items,
    })
}

pub fn read_transactions(text: &str) -> Result<Vec<Transaction>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_transaction_line(l, i + 1))
        .collect()
}
